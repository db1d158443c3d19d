#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace seiznet {

// Deterministic splitmix64 generator. All randomness in the project goes
// through this class so that a (seed, stream) pair produces identical values
// on every platform; the standard library's distributions are not portable
// across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Decorrelated stream for (seed, index) pairs, e.g. one per layer or
  // one per (layer, step).
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed + 0x9e3779b97f4a7c15ULL * (index + 1));
    r.next_u64();
    return r;
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (-limit, limit].
  double uniform_signed(double limit) { return limit - uniform() * 2.0 * limit; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Standard normal, Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double stddev) { return stddev * normal(); }

  bool bernoulli(double p_true) { return uniform() < p_true; }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace seiznet
