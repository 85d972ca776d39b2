#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chromseg/errors.hpp"

namespace chromseg {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense (batch, channel, height, width) array, row-major.
template <class T>
class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{});
  Tensor4(int n, int c, int h, int w, T fill = T{}) : Tensor4(Shape4{n, c, h, w}, fill) {}
  Tensor4(Shape4 shape, std::vector<T> data);

  const Shape4& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& operator()(int n, int c, int y, int x) noexcept { return data_[index(n, c, y, x)]; }
  const T& operator()(int n, int c, int y, int x) const noexcept { return data_[index(n, c, y, x)]; }

  // Contiguous h*w plane for (n, c).
  std::span<T> plane(int n, int c) noexcept {
    return std::span<T>(data_).subspan(index(n, c, 0, 0), static_cast<std::size_t>(shape_.h) * shape_.w);
  }
  std::span<const T> plane(int n, int c) const noexcept {
    return std::span<const T>(data_).subspan(index(n, c, 0, 0), static_cast<std::size_t>(shape_.h) * shape_.w);
  }

  bool all_finite() const noexcept;
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor4&) const = default;

private:
  Shape4 shape_{};
  std::vector<T> data_;
};

// Convolution weights laid out (out, in, k, k) plus per-output bias.
// k is 3 for interior convolutions and 1 for the output head.
template <class T>
struct ConvKernel {
  int out_channels = 0;
  int in_channels = 0;
  int ksize = 3;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvKernel() = default;
  ConvKernel(int out, int in, int k);

  std::size_t weight_count() const noexcept { return weights.size(); }
  std::size_t param_count() const noexcept { return weights.size() + bias.size(); }
  T& weight(int o, int i, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * ksize + ky) * ksize + kx];
  }
  const T& weight(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * ksize + ky) * ksize + kx];
  }

  bool operator==(const ConvKernel&) const = default;
};

extern template class Tensor4<float>;
extern template class Tensor4<double>;
extern template struct ConvKernel<float>;
extern template struct ConvKernel<double>;

}  // namespace chromseg
