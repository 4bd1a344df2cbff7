#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace cao {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds
/// (per refresh, per epoch, per problem component) from a parent seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return mix_seed(mix_seed(parent) ^ (tag * 0xd1342543de82ef95ULL + 1));
}

inline void fill_gaussian(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& x : out) x = dist(rng);
}

}  // namespace cao
