#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace polymoe {

// splitmix64 finalizer. Used to derive independent substreams from a single
// 64-bit seed; every parallel unit of work (restart, chunk, experiment cell)
// gets its own derived stream so results do not depend on scheduling.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t p : path) h = mix64(h ^ p);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> path = {}) {
  return std::mt19937_64(derive_seed(seed, path));
}

// Stream tags keep derivations from colliding across modules.
namespace stream {
inline constexpr std::uint64_t restart = 0x01;
inline constexpr std::uint64_t init = 0x02;
inline constexpr std::uint64_t dataset = 0x03;
inline constexpr std::uint64_t mc_chunk = 0x04;
inline constexpr std::uint64_t cell = 0x05;
inline constexpr std::uint64_t pairs = 0x06;
}  // namespace stream

}  // namespace polymoe
