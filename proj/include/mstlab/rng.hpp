#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace mstlab {

namespace detail {
// 64-bit finalizer (MurmurHash3 / SplitMix64 mixing step).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

// Deterministic splittable random stream (SplitMix64). A stream is keyed by
// (seed, stream id, salt), so Monte Carlo work can be partitioned by index
// and produces identical draws regardless of thread count or visit order.
class RngStream {
 public:
  RngStream() : state_(0) {}
  static RngStream keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0) {
    RngStream r;
    r.state_ = detail::mix64(seed + 0x9e3779b97f4a7c15ull * (stream + 1) +
                             0xd1b54a32d192ed03ull * (salt + 1));
    return r;
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }
  result_type operator()() { return next(); }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}, unbiased (rejection on the top range).
  std::uint64_t below(std::uint64_t n) {
    // Lemire multiply-shift with rejection.
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; draws are produced in pairs.
  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace mstlab
