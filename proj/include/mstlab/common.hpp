#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mstlab {

// Error taxonomy; the CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProvenanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

// FNV-1a 64-bit; used for config/manifest provenance hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}
inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}
std::string hex64(std::uint64_t v);

int default_thread_count();

// Runs fn(i) for i in [0, n). Work is split into fixed-size blocks so that
// any per-block output is independent of the thread count; reductions must
// happen afterwards, in block order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

// Block partition used by deterministic reductions: fn(block, lo, hi) with a
// block size that does not depend on the thread count.
struct BlockRange {
  std::size_t block, lo, hi;
};
std::vector<BlockRange> fixed_blocks(std::size_t n, std::size_t block_size = 8192);
void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                     int threads = 0, std::size_t block_size = 8192);

// Per-block sums of fn(i) over i in [0, n), with one task per block so the
// accumulation order inside a block is fixed. Used by the median-of-means and
// blocked-SE estimators.
struct BlockSums {
  std::vector<long double> sum;
  std::vector<std::size_t> count;
  std::size_t blocks() const { return sum.size(); }
  double mean(std::size_t j) const {
    return count[j] ? double(sum[j] / static_cast<long double>(count[j])) : 0.0;
  }
  double total_mean() const;
  // Standard error of the overall mean from the between-block spread.
  double mean_se() const;
};
BlockSums blocked_sums(std::size_t n, std::size_t target_blocks,
                       const std::function<double(std::size_t)>& fn, int threads = 0);

}  // namespace mstlab
