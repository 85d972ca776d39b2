#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "chromseg/errors.hpp"

namespace chromseg {

// Row-major H x W single-channel raster.
template <class T>
struct Raster {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
    if (h < 0 || w < 0) throw StructuralError("raster dimensions must be non-negative");
  }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < height && c < width; }
  template <class U>
  bool same_dims(const Raster<U>& o) const noexcept { return height == o.height && width == o.width; }

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }

  // Zero outside the raster; used by kernels that read neighbourhoods.
  T at_or(int r, int c, T fallback) const { return contains(r, c) ? (*this)(r, c) : fallback; }

  bool operator==(const Raster&) const = default;
};

// Intensities in [0, 1].
using GrayImage = Raster<float>;
// Class raster: 0 background, 1 chromosome A, 2 chromosome B, 3 overlap.
// Imported data may transiently carry the erroneous value 4.
using LabelMap = Raster<std::uint8_t>;
// Binary raster, 0 or 1.
using Mask = Raster<std::uint8_t>;

inline constexpr int kNumClasses = 4;

}  // namespace chromseg
