#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sketchpriv {

// SplitMix64 finaliser; bijective on 64-bit words.
[[nodiscard]] constexpr auto mix64(std::uint64_t x) noexcept -> std::uint64_t {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for the substream addressed by (seed, tags...). Substreams depend only
// on their address, never on how work is scheduled across threads.
[[nodiscard]] constexpr auto substream_seed(std::uint64_t seed,
                                            std::initializer_list<std::uint64_t> tags) noexcept
    -> std::uint64_t {
  std::uint64_t s = mix64(seed);
  for (const auto t : tags) {
    s = mix64(s ^ mix64(t + 0x632BE59BD9B4E019ULL));
  }
  return s;
}

[[nodiscard]] inline auto substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
    -> std::mt19937_64 {
  return std::mt19937_64(substream_seed(seed, tags));
}

}  // namespace sketchpriv
