#include "chromseg/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace chromseg {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <class T>
Tensor4<T>::Tensor4(Shape4 shape, T fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw StructuralError("negative tensor dimension " + shape.str());
  data_.assign(shape.count(), fill);
}

template <class T>
Tensor4<T>::Tensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw StructuralError("negative tensor dimension " + shape.str());
  if (data_.size() != shape.count())
    throw StructuralError("tensor data length " + std::to_string(data_.size()) +
                          " does not match dims " + shape.str());
}

template <class T>
bool Tensor4<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
ConvKernel<T>::ConvKernel(int out, int in, int k)
    : out_channels(out), in_channels(in), ksize(k),
      weights(static_cast<std::size_t>(out) * in * k * k, T{}), bias(static_cast<std::size_t>(out), T{}) {
  if (out <= 0 || in <= 0) throw StructuralError("kernel channel counts must be positive");
  if (k != 1 && k != 3) throw StructuralError("kernel size must be 1 or 3");
}

template class Tensor4<float>;
template class Tensor4<double>;
template struct ConvKernel<float>;
template struct ConvKernel<double>;

}  // namespace chromseg
