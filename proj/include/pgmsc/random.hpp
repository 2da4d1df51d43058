#ifndef PGMSC_RANDOM_HPP_
#define PGMSC_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace pgmsc {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent sub-seeds from a master
// seed and a counter: derive_seed(master, i) = splitmix64(master + (i+1)*golden).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t counter) noexcept {
  return splitmix64(master + (counter + 1) * 0x9E3779B97F4A7C15ULL);
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return static_cast<int>(uniform01(rng) * n);
}

}  // namespace pgmsc

#endif  // PGMSC_RANDOM_HPP_
