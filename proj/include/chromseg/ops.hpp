#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "chromseg/tensor.hpp"

// Forward and backward kernels the segmentation network is assembled from.
// All functions are pure: outputs depend only on arguments, and repeated calls
// with identical inputs give bit-identical results.
namespace chromseg::ops {

// 'same' zero-padded convolution, stride 1. Output is (n, out_channels, h, w).
// Throws StructuralError on channel mismatch, NumericalError on non-finite input.
template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvKernel<T>& kernel);

template <class T>
struct ConvGrads {
  Tensor4<T> input;
  std::vector<T> weights;  // same layout as ConvKernel::weights
  std::vector<T> bias;
};

// Gradients of sum(upstream * conv2d_forward(input, kernel)).
template <class T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvKernel<T>& kernel,
                             const Tensor4<T>& upstream);

// Flat input indices of the selected maximum for each output element.
struct PoolIndices {
  Shape4 input_shape;
  std::vector<std::uint32_t> argmax;
};

template <class T>
struct PoolResult {
  Tensor4<T> output;
  PoolIndices indices;
};

// 2x2 max pooling, stride 2. Requires even h and w. Ties pick the first
// element in row-major window order.
template <class T>
PoolResult<T> maxpool2x2_forward(const Tensor4<T>& input);

template <class T>
Tensor4<T> maxpool2x2_backward(const Tensor4<T>& upstream, const PoolIndices& indices);

// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
template <class T>
Tensor4<T> upsample2x_nearest(const Tensor4<T>& input);

// Adjoint of upsample2x_nearest: sums each 2x2 block.
template <class T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& upstream);

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& input);

// Derivative at exactly 0 is taken as 0.
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& upstream);

// Channel concatenation, a's channels first.
template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

// Inverse of concat_channels: first `first_channels` channels, then the rest.
template <class T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, int first_channels);

// Per-pixel softmax over the channel axis.
template <class T>
Tensor4<T> softmax(const Tensor4<T>& logits);

template <class T>
struct LossResult {
  T loss{};
  Tensor4<T> grad;
};

using ClassWeights = std::array<double, 4>;

// loss = mean over all n*h*w pixels of -w[y] * log softmax(logits)[y].
// `labels` holds n*h*w class indices in (n, y, x) order; values must be in 0..3.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, std::span<const std::uint8_t> labels,
                                    const std::optional<ClassWeights>& class_weights);

}  // namespace chromseg::ops
