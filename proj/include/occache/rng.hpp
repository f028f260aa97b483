#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace occ {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, used for stream names and user hashing.
inline constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Run-level seed from which independent named generators are derived.
/// Catalog, demand, placement and eviction randomness each take their own
/// stream, so policies compared under one seed see identical demands.
class RngStreams {
public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] Rng stream(std::string_view name) const {
    const std::uint64_t key = splitmix64(seed_ ^ splitmix64(fnv1a64(name)));
    std::seed_seq seq{static_cast<std::uint32_t>(key),
                      static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(seed_),
                      static_cast<std::uint32_t>(seed_ >> 32)};
    return Rng(seq);
  }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
};

} // namespace occ
