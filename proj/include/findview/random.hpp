#pragma once

// Portable sampling helpers. std:: distributions are implementation-defined, which would make
// episode files and corruptions differ between standard libraries; these only rely on the
// engine's raw output.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace findview {

using Rng = std::mt19937_64;

/// Uniform integer in [lo, hi] (Lemire's nearly divisionless method).
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(rng());
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * range;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = -range % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return lo + static_cast<std::int64_t>(m >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller (one value per call).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Poisson sample; exact inversion for small means, rounded normal approximation above 64.
inline std::int64_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean > 64.0) {
    const double v = std::round(mean + std::sqrt(mean) * standard_normal(rng));
    return v < 0 ? 0 : static_cast<std::int64_t>(v);
  }
  const double limit = std::exp(-mean);
  double p = uniform01(rng);
  std::int64_t k = 0;
  while (p > limit) {
    p *= uniform01(rng);
    ++k;
  }
  return k;
}

/// Derives an independent stream seed from a base seed and a salt (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace findview
