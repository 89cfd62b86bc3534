#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "aps/common.hpp"

namespace aps {

/// splitmix64 finalizer; derives well-separated stream seeds from one
/// master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Deterministic random stream with an explicitly serializable state.
///
/// All transforms (uniform, normal, integer draw) are implemented here rather
/// than with std distributions, whose internal caching is implementation
/// defined and would break checkpoint resume equivalence.
class Rng {
 public:
  Rng() : gen_(0) {}
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  int below(int n) {
    if (n <= 0) throw ContractViolation("Rng::below: n must be positive");
    return static_cast<int>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller. Stateless across calls: every draw
  /// consumes exactly two uniforms, which keeps replay of a serialized
  /// state exact.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (!is) throw NumericsError("Rng::load_state: malformed state string");
  }

  bool operator==(const Rng& other) const { return gen_ == other.gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace aps
