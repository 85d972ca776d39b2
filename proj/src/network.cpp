#include "chromseg/network.hpp"

#include <cmath>

#include "chromseg/parallel.hpp"
#include "chromseg/rng.hpp"

namespace chromseg::nn {

using ops::concat_channels;
using ops::conv2d_backward;
using ops::conv2d_forward;
using ops::maxpool2x2_backward;
using ops::maxpool2x2_forward;
using ops::relu_backward;
using ops::relu_forward;
using ops::split_channels;
using ops::upsample2x_backward;
using ops::upsample2x_nearest;

void NetConfig::validate() const {
  if (depth < 1 || depth > 6) throw ConfigError("depth must be in 1..6");
  if (base_filters < 1 || base_filters > 4096) throw ConfigError("base_filters must be in 1..4096");
  if (num_classes != 4) throw ConfigError("num_classes must be 4");
}

void NetConfig::validate_input(int h, int w) const {
  const int step = 1 << depth;
  if (h <= 0 || w <= 0 || h % step != 0 || w % step != 0)
    throw StructuralError("input " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by 2^" +
                          std::to_string(depth));
}

std::vector<LayerSpec> layer_layout(const NetConfig& config) {
  config.validate();
  std::vector<LayerSpec> out;
  auto width = [&](int level) { return config.base_filters << level; };
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    out.push_back({p + ".conv1", l == 0 ? 1 : width(l - 1), width(l), 3});
    out.push_back({p + ".conv2", width(l), width(l), 3});
  }
  out.push_back({"bottleneck.conv1", width(config.depth - 1), width(config.depth), 3});
  out.push_back({"bottleneck.conv2", width(config.depth), width(config.depth), 3});
  for (int l = config.depth - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    out.push_back({p + ".up", width(l + 1), width(l), 3});
    out.push_back({p + ".conv1", 2 * width(l), width(l), 3});
    out.push_back({p + ".conv2", width(l), width(l), 3});
  }
  out.push_back({"head", width(0), config.num_classes, 1});
  return out;
}

std::size_t parameter_count(const NetConfig& config) {
  std::size_t n = 0;
  for (const auto& l : layer_layout(config))
    n += static_cast<std::size_t>(l.out_channels) * l.in_channels * l.ksize * l.ksize + l.out_channels;
  return n;
}

template <class T>
std::size_t ModelParams<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& k : layers) n += k.param_count();
  return n;
}

template <class T>
std::vector<T> ModelParams<T>::flatten() const {
  std::vector<T> out;
  out.reserve(param_count());
  for (const auto& k : layers) {
    out.insert(out.end(), k.weights.begin(), k.weights.end());
    out.insert(out.end(), k.bias.begin(), k.bias.end());
  }
  return out;
}

template <class T>
void ModelParams<T>::unflatten(std::span<const T> values) {
  if (values.size() != param_count()) throw StructuralError("unflatten: parameter count mismatch");
  std::size_t at = 0;
  for (auto& k : layers) {
    std::copy_n(values.begin() + at, k.weights.size(), k.weights.begin());
    at += k.weights.size();
    std::copy_n(values.begin() + at, k.bias.size(), k.bias.begin());
    at += k.bias.size();
  }
}

template <class T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams<T> z;
  for (const auto& k : layers) z.layers.emplace_back(k.out_channels, k.in_channels, k.ksize);
  return z;
}

template <class T>
ModelParams<T> zero_params(const NetConfig& config) {
  ModelParams<T> p;
  for (const auto& l : layer_layout(config)) p.layers.emplace_back(l.out_channels, l.in_channels, l.ksize);
  return p;
}

template <class T>
ModelParams<T> init_params(const NetConfig& config, std::uint64_t seed) {
  ModelParams<T> p = zero_params<T>(config);
  for (std::size_t j = 0; j < p.layers.size(); ++j) {
    auto& k = p.layers[j];
    const double fan_in = static_cast<double>(k.in_channels) * k.ksize * k.ksize;
    const double std_dev = std::sqrt(2.0 / fan_in);
    Rng rng(mix_seed(seed, j));
    for (T& w : k.weights) w = static_cast<T>(rng.normal() * std_dev);
  }
  return p;
}

template <class T>
ModelParams<T> convert_params(const ModelParams<float>& params) {
  ModelParams<T> out;
  for (const auto& k : params.layers) {
    ConvKernel<T> c(k.out_channels, k.in_channels, k.ksize);
    std::copy(k.weights.begin(), k.weights.end(), c.weights.begin());
    std::copy(k.bias.begin(), k.bias.end(), c.bias.begin());
    out.layers.push_back(std::move(c));
  }
  return out;
}

namespace {

template <class T>
struct DoubleConv {
  Tensor4<T> input, z1, a1, z2, out;
};

template <class T>
DoubleConv<T> double_conv(Tensor4<T> input, const ConvKernel<T>& k1, const ConvKernel<T>& k2) {
  DoubleConv<T> d;
  d.input = std::move(input);
  d.z1 = conv2d_forward(d.input, k1);
  d.a1 = relu_forward(d.z1);
  d.z2 = conv2d_forward(d.a1, k2);
  d.out = relu_forward(d.z2);
  return d;
}

// Returns the gradient with respect to the block input and writes parameter
// gradients into g1/g2.
template <class T>
Tensor4<T> double_conv_backward(const DoubleConv<T>& d, const ConvKernel<T>& k1, const ConvKernel<T>& k2,
                                const Tensor4<T>& upstream, ConvKernel<T>& g1, ConvKernel<T>& g2) {
  auto c2 = conv2d_backward(d.a1, k2, relu_backward(d.z2, upstream));
  g2.weights = std::move(c2.weights);
  g2.bias = std::move(c2.bias);
  auto c1 = conv2d_backward(d.input, k1, relu_backward(d.z1, c2.input));
  g1.weights = std::move(c1.weights);
  g1.bias = std::move(c1.bias);
  return std::move(c1.input);
}

template <class T>
struct Trace {
  std::vector<DoubleConv<T>> enc;
  std::vector<ops::PoolIndices> pools;
  DoubleConv<T> bottleneck;
  // Indexed by level.
  std::vector<Tensor4<T>> up_in, up_z;
  std::vector<DoubleConv<T>> dec;
  Tensor4<T> head_in;
  Tensor4<T> logits;
};

struct Index {
  int depth;
  int enc(int l, int j) const { return 2 * l + j; }
  int bottleneck(int j) const { return 2 * depth + j; }
  int dec(int l, int j) const { return 2 * depth + 2 + 3 * (depth - 1 - l) + j; }
  int head() const { return 5 * depth + 2; }
};

template <class T>
void check_params(const NetConfig& config, const ModelParams<T>& params) {
  const auto layout = layer_layout(config);
  if (params.layers.size() != layout.size()) throw StructuralError("parameter layer count does not match config");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& k = params.layers[i];
    if (k.in_channels != layout[i].in_channels || k.out_channels != layout[i].out_channels ||
        k.ksize != layout[i].ksize)
      throw StructuralError("parameter layer " + layout[i].name + " has wrong dims");
  }
}

template <class T>
Trace<T> run_forward(const NetConfig& config, const ModelParams<T>& params, const Tensor4<T>& batch) {
  check_params(config, params);
  if (batch.c() != 1) throw StructuralError("network input must have 1 channel, got " + batch.shape().str());
  config.validate_input(batch.h(), batch.w());
  const Index ix{config.depth};
  const auto& L = params.layers;

  Trace<T> t;
  t.up_in.resize(config.depth);
  t.up_z.resize(config.depth);
  t.dec.resize(config.depth);
  Tensor4<T> x = batch;
  for (int l = 0; l < config.depth; ++l) {
    t.enc.push_back(double_conv(std::move(x), L[ix.enc(l, 0)], L[ix.enc(l, 1)]));
    auto pooled = maxpool2x2_forward(t.enc.back().out);
    t.pools.push_back(std::move(pooled.indices));
    x = std::move(pooled.output);
  }
  t.bottleneck = double_conv(std::move(x), L[ix.bottleneck(0)], L[ix.bottleneck(1)]);
  const Tensor4<T>* below = &t.bottleneck.out;
  for (int l = config.depth - 1; l >= 0; --l) {
    t.up_in[l] = upsample2x_nearest(*below);
    t.up_z[l] = conv2d_forward(t.up_in[l], L[ix.dec(l, 0)]);
    auto cat = concat_channels(t.enc[l].out, relu_forward(t.up_z[l]));
    t.dec[l] = double_conv(std::move(cat), L[ix.dec(l, 1)], L[ix.dec(l, 2)]);
    below = &t.dec[l].out;
  }
  t.head_in = *below;
  t.logits = conv2d_forward(t.head_in, L[ix.head()]);
  return t;
}

}  // namespace

template <class T>
Tensor4<T> forward(const NetConfig& config, const ModelParams<T>& params, const Tensor4<T>& batch) {
  return run_forward(config, params, batch).logits;
}

template <class T>
Gradients<T> backward(const NetConfig& config, const ModelParams<T>& params, const Tensor4<T>& batch,
                      std::span<const std::uint8_t> labels, const std::optional<ops::ClassWeights>& class_weights) {
  const Trace<T> t = run_forward(config, params, batch);
  const Index ix{config.depth};
  const auto& L = params.layers;

  auto loss = ops::softmax_cross_entropy(t.logits, labels, class_weights);
  Gradients<T> out{loss.loss, params.zeros_like()};
  auto& G = out.grads.layers;

  auto head = conv2d_backward(t.head_in, L[ix.head()], loss.grad);
  G[ix.head()].weights = std::move(head.weights);
  G[ix.head()].bias = std::move(head.bias);
  Tensor4<T> g = std::move(head.input);

  std::vector<Tensor4<T>> skip_grad(config.depth);
  for (int l = 0; l < config.depth; ++l) {
    Tensor4<T> g_cat = double_conv_backward(t.dec[l], L[ix.dec(l, 1)], L[ix.dec(l, 2)], g, G[ix.dec(l, 1)],
                                            G[ix.dec(l, 2)]);
    auto [g_skip, g_up] = split_channels(g_cat, t.enc[l].out.c());
    skip_grad[l] = std::move(g_skip);
    auto up = conv2d_backward(t.up_in[l], L[ix.dec(l, 0)], relu_backward(t.up_z[l], g_up));
    G[ix.dec(l, 0)].weights = std::move(up.weights);
    G[ix.dec(l, 0)].bias = std::move(up.bias);
    g = upsample2x_backward(up.input);
  }

  g = double_conv_backward(t.bottleneck, L[ix.bottleneck(0)], L[ix.bottleneck(1)], g, G[ix.bottleneck(0)],
                           G[ix.bottleneck(1)]);
  for (int l = config.depth - 1; l >= 0; --l) {
    Tensor4<T> g_skip_total = maxpool2x2_backward(g, t.pools[l]);
    for (std::size_t i = 0; i < g_skip_total.size(); ++i) g_skip_total.vec()[i] += skip_grad[l].vec()[i];
    g = double_conv_backward(t.enc[l], L[ix.enc(l, 0)], L[ix.enc(l, 1)], g_skip_total, G[ix.enc(l, 0)],
                             G[ix.enc(l, 1)]);
  }
  return out;
}

Tensor4<float> to_batch(std::span<const GrayImage* const> images) {
  if (images.empty()) return {};
  const int h = images.front()->height, w = images.front()->width;
  Tensor4<float> out(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) throw StructuralError("to_batch: mixed image sizes");
    std::copy(images[i]->data.begin(), images[i]->data.end(), out.vec().begin() + out.index(static_cast<int>(i), 0, 0, 0));
  }
  return out;
}

std::vector<std::uint8_t> to_label_buffer(std::span<const LabelMap* const> labels) {
  std::vector<std::uint8_t> out;
  for (const LabelMap* l : labels) out.insert(out.end(), l->data.begin(), l->data.end());
  return out;
}

std::vector<LabelMap> argmax_labels(const Tensor4<float>& logits) {
  std::vector<LabelMap> out;
  for (int n = 0; n < logits.n(); ++n) {
    LabelMap m(logits.h(), logits.w());
    for (int y = 0; y < logits.h(); ++y)
      for (int x = 0; x < logits.w(); ++x) {
        int best = 0;
        for (int c = 1; c < logits.c(); ++c)
          if (logits(n, c, y, x) > logits(n, best, y, x)) best = c;
        m(y, x) = static_cast<std::uint8_t>(best);
      }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<LabelMap> predict(const NetConfig& config, const ModelParams<float>& params,
                              std::span<const GrayImage> images, int batch_size, int threads) {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  const std::size_t batches = (images.size() + batch_size - 1) / batch_size;
  std::vector<LabelMap> out(images.size());
  parallel_for(batches, threads, [&](std::size_t b) {
    const std::size_t lo = b * batch_size, hi = std::min(images.size(), lo + batch_size);
    std::vector<const GrayImage*> ptrs;
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&images[i]);
    auto labels = argmax_labels(forward(config, params, to_batch(ptrs)));
    for (std::size_t i = lo; i < hi; ++i) out[i] = std::move(labels[i - lo]);
  });
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> zero_params(const NetConfig&);
template ModelParams<double> zero_params(const NetConfig&);
template ModelParams<float> init_params(const NetConfig&, std::uint64_t);
template ModelParams<double> init_params(const NetConfig&, std::uint64_t);
template ModelParams<float> convert_params(const ModelParams<float>&);
template ModelParams<double> convert_params(const ModelParams<float>&);
template Tensor4<float> forward(const NetConfig&, const ModelParams<float>&, const Tensor4<float>&);
template Tensor4<double> forward(const NetConfig&, const ModelParams<double>&, const Tensor4<double>&);
template Gradients<float> backward(const NetConfig&, const ModelParams<float>&, const Tensor4<float>&,
                                   std::span<const std::uint8_t>, const std::optional<ops::ClassWeights>&);
template Gradients<double> backward(const NetConfig&, const ModelParams<double>&, const Tensor4<double>&,
                                    std::span<const std::uint8_t>, const std::optional<ops::ClassWeights>&);

}  // namespace chromseg::nn
