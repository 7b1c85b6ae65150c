#pragma once

#include <cstdint>

namespace envymarket {

// splitmix64; used for all seed derivation so sub-streams are
// reproducible across platforms and thread counts.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child seed for stream `stream` of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x51ed270b9d1c2c44ULL));
}

// Uniform in [0,1) from a raw 64-bit state.
inline double unit_real(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// One uniform draw keyed by (seed, stream); independent of call order.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t stream) {
  return unit_real(derive_seed(seed, stream));
}

}  // namespace envymarket
