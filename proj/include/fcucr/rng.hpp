#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fcucr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream from a master seed and a tuple of keys
// (client id, round, purpose tag, ...). Streams never depend on scheduling.
inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = splitmix64(master);
  for (std::uint64_t k : keys) state = splitmix64(state ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return Rng(state);
}

// Purpose tags for make_stream.
enum class Stream : std::uint64_t {
  kInit = 1,
  kHeadInit = 2,
  kNegatives = 3,
  kLdp = 4,
  kLdpPrototype = 5,
  kEvalNegatives = 6,
  kHistogram = 7,
};

inline Rng make_stream(std::uint64_t master, Stream tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return make_stream(master, {static_cast<std::uint64_t>(tag), a, b});
}

}  // namespace fcucr
