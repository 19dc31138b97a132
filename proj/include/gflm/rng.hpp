#pragma once

#include <cstdint>
#include <random>

namespace gflm {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (master, stream, index). Streams separate
/// uses of randomness (data, null draws, ...); index separates replicates or
/// blocks within a stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

}  // namespace gflm
