#pragma once

// Binary sketch format, all integers little-endian:
//
//   offset size  field
//   0      4     magic "SKP1"
//   4      1     version (1)
//   5      1     algo (1 KMV, 2 PCSA, 3 LOGLOG, 4 HLL)
//   6      2     param (k or p)
//   8      8     salt fingerprint
//   16     4     payload length in bytes
//   20     ...   payload
//
// Payload: KMV = u32 count then count u64 hashes ascending; PCSA = k u32
// bitmaps; LOGLOG/HLL = 2^p register bytes.

#include <cstddef>
#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "sketchpriv/sketch.hpp"

namespace sketchpriv {

inline constexpr std::size_t kHeaderBytes = 20;
inline constexpr std::uint8_t kFormatVersion = 1;

[[nodiscard]] auto serialize(const Sketch& m) -> std::vector<std::uint8_t>;
// Throws FormatError on bad magic, version, truncation or invalid state.
[[nodiscard]] auto deserialize(std::span<const std::uint8_t> bytes) -> Sketch;

auto read_sketch_file(const std::string& path) -> Sketch;
void write_sketch_file(const std::string& path, const Sketch& m);

}  // namespace sketchpriv
