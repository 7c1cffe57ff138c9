#pragma once

#include <cmath>
#include <cstdint>

namespace bica {

// SplitMix64 (Stafford mix 13). Hand-rolled on purpose: std::mt19937 plus
// std::*_distribution is not bit-stable across standard library
// implementations, and seeded experiments must reproduce byte-identical
// output everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); rejects the single zero value.
  double uniform_open01() noexcept {
    double u;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return u;
  }

  bool bernoulli(double p) noexcept { return uniform01() < p; }

  // Exponential with mean 1.
  double exponential() noexcept { return -std::log(uniform_open01()); }

  // Standard normal via Box-Muller.
  double normal() noexcept {
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.2831853071795864769 * u2);
  }

 private:
  std::uint64_t state_;
};

// Child stream `stream` of a master seed: element `stream` of the SplitMix64
// sequence seeded with `master`. Giving every run/source/purpose its own
// derived stream keeps parallel execution order-independent.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::uint64_t stream) noexcept {
  return SplitMix64(master + 0x9E3779B97F4A7C15ull * stream).next();
}

}  // namespace bica
