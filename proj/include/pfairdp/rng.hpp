#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace pfairdp {

// Deterministic random source. The mt19937_64 bit stream is pinned by the C++
// standard, but the standard *distributions* are not, so every draw here is
// derived from raw bits in a fixed way. Identical seeds therefore reproduce
// identical sequences on any platform/compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1): top 53 bits scaled, the usual double construction.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform: lo must be < hi");
    return lo + (hi - lo) * uniform01();
  }

  double log_uniform(double lo, double hi) {
    if (!(lo > 0.0 && lo < hi)) throw std::invalid_argument("log_uniform: need 0 < lo < hi");
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Uniform integer on [lo, hi], both ends inclusive. Modulo bias is below
  // 2^-48 for every range used here, far under anything the tests can see.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: lo must be <= hi");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller; the sine mate of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1] so the log is finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // Fisher-Yates over 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  // Independent child stream; splitmix64 scrambles (parent draw, stream id).
  Rng fork(std::uint64_t stream) {
    return Rng(splitmix64(next_u64() + 0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pfairdp
