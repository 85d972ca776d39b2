#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chromseg/ops.hpp"
#include "chromseg/raster.hpp"
#include "chromseg/tensor.hpp"

// Simplified U-Net: `depth` encoder levels of (conv3x3+ReLU)x2 then 2x2 max
// pool, a (conv3x3+ReLU)x2 bottleneck, and per level a decoder of nearest 2x
// upsampling + conv3x3+ReLU, concatenation with the encoder skip (skip
// channels first) and (conv3x3+ReLU)x2, closed by a 1x1 head giving 4 logits.
// All convolutions use 'same' padding, so logits match the input's height/width.
namespace chromseg::nn {

struct NetConfig {
  int depth = 2;
  int base_filters = 16;
  int num_classes = 4;

  void validate() const;
  // Input height/width must be divisible by 2^depth.
  void validate_input(int h, int w) const;
  bool operator==(const NetConfig&) const = default;
};

struct LayerSpec {
  std::string name;
  int in_channels;
  int out_channels;
  int ksize;
};

// Fixed parameter order (the checkpoint format depends on it):
//   enc{l}.conv1, enc{l}.conv2            for l = 0 .. depth-1
//   bottleneck.conv1, bottleneck.conv2
//   dec{l}.up, dec{l}.conv1, dec{l}.conv2 for l = depth-1 .. 0
//   head
// Level l has base_filters * 2^l channels; the bottleneck base_filters * 2^depth.
std::vector<LayerSpec> layer_layout(const NetConfig& config);

// Total weights + biases. 129,604 for the default config.
std::size_t parameter_count(const NetConfig& config);

template <class T>
struct ModelParams {
  std::vector<ConvKernel<T>> layers;

  std::size_t param_count() const;
  // Flattened as, per layer in order, weights then bias.
  std::vector<T> flatten() const;
  void unflatten(std::span<const T> values);
  // Zero tensor with the same layout.
  ModelParams zeros_like() const;
  bool operator==(const ModelParams&) const = default;
};

// Zero-valued parameters in the documented layout.
template <class T>
ModelParams<T> zero_params(const NetConfig& config);

// He-normal weights (std = sqrt(2 / fan_in), fan_in = in_channels * k * k),
// zero biases. Layer j draws from mix(seed, j).
template <class T>
ModelParams<T> init_params(const NetConfig& config, std::uint64_t seed);

template <class T>
ModelParams<T> convert_params(const ModelParams<float>& params);

// Logits (n, 4, h, w) for a (n, 1, h, w) batch.
template <class T>
Tensor4<T> forward(const NetConfig& config, const ModelParams<T>& params, const Tensor4<T>& batch);

template <class T>
struct Gradients {
  T loss{};
  ModelParams<T> grads;
};

// Softmax cross-entropy loss of forward() and its exact gradient with respect
// to every parameter, aligned with ModelParams order.
template <class T>
Gradients<T> backward(const NetConfig& config, const ModelParams<T>& params, const Tensor4<T>& batch,
                      std::span<const std::uint8_t> labels, const std::optional<ops::ClassWeights>& class_weights);

// Images (all the same size) as a (n, 1, h, w) batch.
Tensor4<float> to_batch(std::span<const GrayImage* const> images);
// Labels as a flat n*h*w class-index buffer.
std::vector<std::uint8_t> to_label_buffer(std::span<const LabelMap* const> labels);

// Per-pixel argmax of the logits; ties pick the smaller class.
std::vector<LabelMap> argmax_labels(const Tensor4<float>& logits);

// Runs the model over images in batches of `batch_size`.
std::vector<LabelMap> predict(const NetConfig& config, const ModelParams<float>& params,
                              std::span<const GrayImage> images, int batch_size = 8, int threads = 1);

}  // namespace chromseg::nn
