#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chromseg/raster.hpp"

namespace chromseg::netpbm {

// Interleaved 8-bit RGB raster.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // 3 * height * width

  bool operator==(const RgbImage&) const = default;
};

// Binary (P5) 8-bit greymap. Throws FormatError on anything else
// (ASCII P2, maxval > 255, truncated payload).
Raster<std::uint8_t> read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& img);

// Binary (P6) 8-bit pixmap.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace chromseg::netpbm
