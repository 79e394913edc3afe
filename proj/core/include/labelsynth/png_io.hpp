#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace labelsynth::png {

/// Decoded PNG: `channels` is 1 (gray) or 3 (RGB); `bit_depth` 8 or 16.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

/// Lossless encode; `bit_depth` 8 or 16, `channels` 1 or 3.
std::vector<std::uint8_t> encode(const Raster& raster);
/// Palette and low-bit gray are expanded; alpha is dropped. Throws Error on malformed data.
Raster decode(const std::uint8_t* data, std::size_t size);
inline Raster decode(const std::vector<std::uint8_t>& bytes) { return decode(bytes.data(), bytes.size()); }

void write_file(const std::string& path, const Raster& raster);
Raster read_file(const std::string& path);

std::vector<std::uint8_t> read_bytes(const std::string& path);
/// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_bytes_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace labelsynth::png
