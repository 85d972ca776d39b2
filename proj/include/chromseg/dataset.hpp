#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "chromseg/raster.hpp"

namespace chromseg {

// Provenance of a generated sample. Not persisted in CHRSEG01 files.
struct SampleMeta {
  std::array<int, 2> pair_ids{-1, -1};
  std::array<int, 2> angles_deg{0, 0};
  std::array<std::array<int, 2>, 2> offsets{};  // (dx, dy) per chromosome
  std::uint64_t seed = 0;

  bool operator==(const SampleMeta&) const = default;
};

struct Sample {
  GrayImage image;
  LabelMap label;
  SampleMeta meta;
};

using Dataset = std::vector<Sample>;

// u8 <-> [0,1] intensity conversion used by every file format.
std::uint8_t to_byte(float v) noexcept;
float from_byte(std::uint8_t b) noexcept;
// Snaps every pixel to the nearest 1/255 step, i.e. to what a file can hold.
void quantize(GrayImage& img) noexcept;

// CHRSEG01, little-endian:
//   "CHRSEG01" | u32 count | u16 height | u16 width |
//   per sample: h*w u8 image (round(gray*255)) then h*w u8 labels.
// All samples share one height/width. An empty dataset is written with 0x0 dims.
inline constexpr std::size_t kDatasetHeaderBytes = 16;

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
// Labels 0..3 are accepted, plus 4 (the erroneous value that cleaning repairs).
// Throws FormatError on bad magic, truncation, trailing bytes or labels > 4.
Dataset read_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);

}  // namespace chromseg
