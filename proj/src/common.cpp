#include "mstlab/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace mstlab {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

int default_thread_count() {
  if (const char* env = std::getenv("MSTLAB_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<BlockRange> fixed_blocks(std::size_t n, std::size_t block_size) {
  std::vector<BlockRange> out;
  out.reserve(n / block_size + 1);
  for (std::size_t lo = 0, b = 0; lo < n; lo += block_size, ++b)
    out.push_back({b, lo, std::min(n, lo + block_size)});
  return out;
}

void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                     int threads, std::size_t block_size) {
  if (n == 0) return;
  auto blocks = fixed_blocks(n, block_size);
  if (threads <= 0) threads = default_thread_count();
  threads = std::min<std::size_t>(threads, blocks.size());
  if (threads <= 1) {
    for (const auto& b : blocks) fn(b.block, b.lo, b.hi);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(threads);
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= blocks.size() || failed.load()) return;
        try {
          fn(blocks[i].block, blocks[i].lo, blocks[i].hi);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failed.load() && err) std::rethrow_exception(err);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads) {
  parallel_blocks(
      n,
      [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      },
      threads);
}

double BlockSums::total_mean() const {
  long double s = 0.0L;
  std::size_t n = 0;
  for (std::size_t j = 0; j < sum.size(); ++j) {
    s += sum[j];
    n += count[j];
  }
  return n ? double(s / static_cast<long double>(n)) : 0.0;
}

double BlockSums::mean_se() const {
  const std::size_t k = blocks();
  if (k < 2) return 0.0;
  double overall = total_mean();
  long double var = 0.0L;
  for (std::size_t j = 0; j < k; ++j) {
    double d = mean(j) - overall;
    var += static_cast<long double>(d) * d;
  }
  return std::sqrt(double(var) / (double(k) * double(k - 1)));
}

BlockSums blocked_sums(std::size_t n, std::size_t target_blocks,
                       const std::function<double(std::size_t)>& fn, int threads) {
  target_blocks = std::max<std::size_t>(1, std::min(target_blocks, n));
  std::size_t block_size = (n + target_blocks - 1) / target_blocks;
  std::size_t n_blocks = (n + block_size - 1) / block_size;
  BlockSums out;
  out.sum.assign(n_blocks, 0.0L);
  out.count.assign(n_blocks, 0);
  parallel_blocks(
      n,
      [&](std::size_t b, std::size_t lo, std::size_t hi) {
        long double acc = 0.0L;
        for (std::size_t i = lo; i < hi; ++i) acc += fn(i);
        out.sum[b] = acc;
        out.count[b] = hi - lo;
      },
      threads, block_size);
  return out;
}

}  // namespace mstlab
