#include "chromseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace chromseg {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'R', 'S', 'E', 'G', '0', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

std::uint8_t to_byte(float v) noexcept {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

float from_byte(std::uint8_t b) noexcept { return static_cast<float>(b) / 255.0f; }

void quantize(GrayImage& img) noexcept {
  for (float& v : img.data) v = from_byte(to_byte(v));
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const int h = ds.empty() ? 0 : ds.front().image.height;
  const int w = ds.empty() ? 0 : ds.front().image.width;
  if (h > 0xFFFF || w > 0xFFFF) throw StructuralError("dataset dims exceed u16");
  if (ds.size() > 0xFFFFFFFFu) throw StructuralError("dataset too large for u32 count");

  std::vector<std::uint8_t> out;
  out.reserve(kDatasetHeaderBytes + ds.size() * 2 * static_cast<std::size_t>(h) * w);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  put_u16(out, static_cast<std::uint16_t>(h));
  put_u16(out, static_cast<std::uint16_t>(w));
  for (const Sample& s : ds) {
    if (s.image.height != h || s.image.width != w || !s.label.same_dims(s.image))
      throw StructuralError("write_dataset: all images and labels must share one size");
    for (float v : s.image.data) out.push_back(to_byte(v));
    out.insert(out.end(), s.label.data.begin(), s.label.data.end());
  }
  return out;
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kDatasetHeaderBytes) throw FormatError("dataset truncated: header incomplete");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("dataset: bad magic");
  const std::uint32_t count = get_u32(bytes.data() + 8);
  const int h = get_u16(bytes.data() + 12);
  const int w = get_u16(bytes.data() + 14);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t expected = kDatasetHeaderBytes + static_cast<std::size_t>(count) * 2 * plane;
  if (bytes.size() < expected) throw FormatError("dataset truncated: payload shorter than header declares");
  if (bytes.size() > expected) throw FormatError("dataset: trailing bytes after payload");

  Dataset ds(count);
  const std::uint8_t* p = bytes.data() + kDatasetHeaderBytes;
  for (Sample& s : ds) {
    s.image = GrayImage(h, w);
    s.label = LabelMap(h, w);
    for (std::size_t i = 0; i < plane; ++i) s.image.data[i] = from_byte(p[i]);
    p += plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (p[i] > 4) throw FormatError("dataset: label value " + std::to_string(p[i]) + " out of range");
      s.label.data[i] = p[i];
    }
    p += plane;
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const auto bytes = encode_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_dataset(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace chromseg
