#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nlgad {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Purpose tags so that independent consumers of one seed never share a stream.
enum class StreamTag : std::uint64_t {
  init = 1,
  selection = 2,
  learning = 3,
  scoring = 4,
  injection = 5,
  synth = 6,
  sampling = 7,
};

/// Deterministically derives an independent generator from a seed and a path
/// of integers (e.g. tag, epoch, target). The result does not depend on which
/// other streams were drawn before, so per-target sampling can be scheduled in
/// any order.
inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = detail::splitmix64(seed ^ (static_cast<std::uint64_t>(tag) << 56));
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

}  // namespace nlgad
