#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kipkit/common.hpp"

namespace kipkit {

// counter-based splitmix64: draw k is a pure function of (seed, k), so
// streams are value-copyable and platform-independent
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double standard_normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t index(std::size_t bound) {
    if (bound < 1) throw InvalidParam("index bound must be >= 1");
    const std::uint64_t b = bound;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % b);
  }

  std::vector<double> uniform01_draws(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = uniform01();
    return out;
  }

  std::vector<double> normal_draws(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = standard_normal();
    return out;
  }

  std::vector<std::size_t> index_draws(std::size_t n, std::size_t bound) {
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = index(bound);
    return out;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw InvalidParam("sample size exceeds population");
    auto p = permutation(n);
    p.resize(k);
    return p;
  }

  RngStream fork(std::uint64_t salt) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull + salt * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngStream(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace kipkit
