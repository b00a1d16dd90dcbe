#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace transgcr {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent stream seeds from a base
// seed and a tuple of cell coordinates.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// seed = splitmix64(... splitmix64(splitmix64(base) ^ k0) ^ k1 ...)
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t k : keys) h = splitmix64(h ^ k);
  return h;
}

inline std::uint64_t seed_key(double value) { return std::bit_cast<std::uint64_t>(value); }

}  // namespace transgcr
