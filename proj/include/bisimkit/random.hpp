#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bisimkit {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Uniform draw in [0, 1) built from raw engine output so results do not depend
// on the standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Box-Muller standard normal.
double standard_normal(Rng& rng);

// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Dirichlet(1, ..., 1) sample of the given size.
std::vector<double> dirichlet_ones(Rng& rng, std::size_t n);

}  // namespace bisimkit
