#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace samplepair {

/// The random source every randomized operation takes explicitly.
using RandomSource = std::mt19937_64;

/// splitmix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic stream keyed by a base seed and a path of indices
/// (e.g. {epoch, sample position}). Streams for distinct keys do not depend on
/// the order in which they are created, so work can be split across workers.
inline RandomSource derive_stream(std::uint64_t base,
                                  std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = mix_seed(base);
  for (auto k : key) h = mix_seed(h ^ mix_seed(k + 0x632be59bd9b4e019ULL));
  return RandomSource{h};
}

inline double uniform01(RandomSource& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(RandomSource& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool coin(RandomSource& rng) { return uniform_index(rng, 2) == 1; }

}  // namespace samplepair
