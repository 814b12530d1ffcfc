#pragma once

#include <cstdint>
#include <random>

namespace signscan {

// splitmix64; used to decorrelate seeds derived from (master, index) pairs so
// parallel and serial runs draw identical per-item streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x51ed270b7a2cbdefULL));
}

inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t index) {
  return std::mt19937_64(derive_seed(master, index));
}

}  // namespace signscan
