#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace voisurv {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hashes a tuple of keys (seed, outer index, arm, ...) into a stream seed.
/// Streams for distinct key tuples are independent for practical purposes.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  const std::uint64_t s = stream_key(keys);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

}  // namespace voisurv
