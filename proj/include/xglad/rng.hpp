#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace xglad {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Unbiased draw from [0, n). Avoids std::uniform_int_distribution, whose
// output is implementation-defined; raw engine output keeps generated data
// identical across standard libraries.
inline std::uint64_t rng_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Inclusive integer range.
inline int rng_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// Uniform in [0, 1) with 53 random bits.
inline double rng_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double rng_uniform(Rng& rng, double a, double b) {
  return a + (b - a) * rng_unit(rng);
}

// Fisher-Yates shuffle on top of rng_below.
template <typename T>
void rng_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace xglad
