#pragma once

// Seeded randomness with portable sampling. std::mt19937_64 output is fixed
// by the standard; the std:: distributions are not, so the few samplers the
// simulator needs are written against the raw engine.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace corrsim {

/// Mixes values into a well-spread 64-bit seed (splitmix64 finalizer).
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

/// FNV-1a, used for config hashes and string-derived seeds.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Uniform in [0, 1).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return n == 0 ? 0 : static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline bool bernoulli(std::mt19937_64& rng, double p) { return uniform01(rng) < p; }

/// Standard normal via Box-Muller (one value per call).
inline double normal(std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace corrsim
