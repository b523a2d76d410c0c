#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sdlab/vec2.hpp"

namespace sdlab {

// Seeded random source. Uniforms and normals are derived from raw mt19937_64
// bits instead of the standard <random> distributions, whose output is
// implementation-defined; this keeps byte-identical reruns on the table.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_bits() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (rejection on 2^64 mod n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const std::uint64_t reject_below = (~n + 1) % n;  // 2^64 mod n
    std::uint64_t x = gen_();
    while (x < reject_below) x = gen_();
    return x % n;
  }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_range(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_range: empty range");
    return lo + static_cast<int>(uniform_int(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec2 normal2() {
    const double a = normal();
    const double b = normal();
    return {a, b};
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sdlab
