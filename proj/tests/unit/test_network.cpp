#include <doctest.h>

#include <cmath>

#include "chromseg/network.hpp"
#include "fixtures.hpp"

using namespace chromseg;
using namespace chromseg::nn;

TEST_CASE("default layer layout and parameter count") {
  const NetConfig cfg;
  const auto layout = layer_layout(cfg);
  std::vector<std::string> names;
  for (const auto& l : layout) names.push_back(l.name);
  CHECK(names == std::vector<std::string>{"enc0.conv1", "enc0.conv2", "enc1.conv1", "enc1.conv2", "bottleneck.conv1",
                                          "bottleneck.conv2", "dec1.up", "dec1.conv1", "dec1.conv2", "dec0.up",
                                          "dec0.conv1", "dec0.conv2", "head"});
  // Independent tally: (in * k * k + 1) * out per layer.
  const int f = 16;
  const std::size_t by_hand = (1 * 9 + 1) * f + (f * 9 + 1) * f                    // enc0
                              + (f * 9 + 1) * 2 * f + (2 * f * 9 + 1) * 2 * f      // enc1
                              + (2 * f * 9 + 1) * 4 * f + (4 * f * 9 + 1) * 4 * f  // bottleneck
                              + (4 * f * 9 + 1) * 2 * f + (4 * f * 9 + 1) * 2 * f + (2 * f * 9 + 1) * 2 * f  // dec1
                              + (2 * f * 9 + 1) * f + (2 * f * 9 + 1) * f + (f * 9 + 1) * f                  // dec0
                              + (f + 1) * 4;                                                                 // head
  CHECK(by_hand == 129604);
  CHECK(parameter_count(cfg) == 129604);
  CHECK(zero_params<float>(cfg).param_count() == 129604);
  CHECK(layout.back().ksize == 1);
}

TEST_CASE("config and input validation") {
  CHECK_THROWS_AS(NetConfig({0, 16, 4}).validate(), ConfigError);
  CHECK_THROWS_AS(NetConfig({2, 16, 3}).validate(), ConfigError);
  CHECK_NOTHROW(NetConfig{}.validate_input(88, 88));
  CHECK_THROWS_AS(NetConfig{}.validate_input(90, 88), StructuralError);
  CHECK_THROWS_AS(NetConfig({3, 16, 4}).validate_input(88, 4), StructuralError);
  const NetConfig cfg{1, 2, 4};
  const auto params = zero_params<float>(cfg);
  CHECK_THROWS_AS(forward(cfg, params, Tensor4<float>(1, 2, 8, 8)), StructuralError);
  CHECK_THROWS_AS(forward(NetConfig{1, 3, 4}, params, Tensor4<float>(1, 1, 8, 8)), StructuralError);
}

TEST_CASE("logits keep the input's spatial size") {
  const NetConfig cfg;
  const auto params = init_params<float>(cfg, 1);
  Rng rng(1);
  const auto batch = fixtures::random_tensor<float>({2, 1, 88, 88}, rng, 0, 1);
  const auto logits = forward(cfg, params, batch);
  CHECK(logits.shape() == Shape4{2, 4, 88, 88});
  CHECK(logits.all_finite());
}

TEST_CASE("zero parameters give uniform class probabilities") {
  const NetConfig cfg{2, 4, 4};
  Rng rng(2);
  const auto logits = forward(cfg, zero_params<float>(cfg), fixtures::random_tensor<float>({1, 1, 16, 16}, rng));
  for (float v : logits.vec()) CHECK(v == 0.0f);
  const auto p = ops::softmax(logits);
  for (float v : p.vec()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("depth-1 forward equals the op-by-op composition") {
  const NetConfig cfg{1, 2, 4};
  Rng rng(3);
  auto params = init_params<double>(cfg, 4);
  for (auto& layer : params.layers)
    for (auto& b : layer.bias) b = rng.uniform(-0.2, 0.2);
  const auto x = fixtures::random_tensor<double>({1, 1, 8, 8}, rng, 0, 1);
  const auto& L = params.layers;
  using namespace chromseg::ops;
  // Direct-loop convolutions so the oracle does not share the GEMM path.
  auto conv_relu = [](const Tensor4<double>& t, const ConvKernel<double>& k) {
    return relu_forward(fixtures::naive_conv(t, k));
  };
  const auto e = conv_relu(conv_relu(x, L[0]), L[1]);
  const auto b = conv_relu(conv_relu(maxpool2x2_forward(e).output, L[2]), L[3]);
  const auto u = conv_relu(upsample2x_nearest(b), L[4]);
  const auto d = conv_relu(conv_relu(concat_channels(e, u), L[5]), L[6]);
  const auto want = fixtures::naive_conv(d, L[7]);
  const auto got = forward(cfg, params, x);
  REQUIRE(got.shape() == want.shape());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.vec()[i] == doctest::Approx(want.vec()[i]).epsilon(1e-12));
}

TEST_CASE("He initialisation statistics") {
  const NetConfig cfg;
  const auto a = init_params<float>(cfg, 7);
  CHECK(a == init_params<float>(cfg, 7));
  CHECK_FALSE(a == init_params<float>(cfg, 8));
  for (const auto& layer : a.layers) {
    for (float b : layer.bias) CHECK(b == 0.0f);
    if (layer.weights.size() < 1000) continue;
    double sq = 0;
    for (float w : layer.weights) sq += static_cast<double>(w) * w;
    const double sd = std::sqrt(sq / static_cast<double>(layer.weights.size()));
    const double target = std::sqrt(2.0 / (layer.in_channels * layer.ksize * layer.ksize));
    CHECK(std::abs(sd - target) <= 0.2 * target);
  }
}

TEST_CASE("flatten order is per layer, weights then bias") {
  const NetConfig cfg{1, 2, 4};
  auto p = zero_params<float>(cfg);
  p.layers[0].bias[1] = 5.0f;
  p.layers[1].weights[0] = 6.0f;
  const auto flat = p.flatten();
  CHECK(flat[p.layers[0].weights.size() + 1] == 5.0f);
  CHECK(flat[p.layers[0].param_count()] == 6.0f);
  auto q = zero_params<float>(cfg);
  q.unflatten(flat);
  CHECK(q == p);
  CHECK_THROWS_AS(q.unflatten(std::vector<float>(3)), StructuralError);
}

TEST_CASE("argmax picks the smaller class on ties") {
  Tensor4<float> logits(1, 4, 1, 3);
  // pixel 0: classes 1 and 2 tie; pixel 1: all equal; pixel 2: class 3 wins.
  logits(0, 1, 0, 0) = logits(0, 2, 0, 0) = 2.0f;
  logits(0, 3, 0, 2) = 1.0f;
  const auto labels = argmax_labels(logits);
  CHECK(labels.at(0).data == std::vector<std::uint8_t>{1, 0, 3});
}

TEST_CASE("prediction does not depend on batch size or threads") {
  const NetConfig cfg{2, 4, 4};
  const auto params = init_params<float>(cfg, 9);
  Rng rng(9);
  std::vector<GrayImage> images;
  for (int i = 0; i < 5; ++i) {
    GrayImage g(16, 16);
    for (auto& v : g.data) v = static_cast<float>(rng.uniform());
    images.push_back(g);
  }
  const auto a = predict(cfg, params, images, 1, 1);
  const auto b = predict(cfg, params, images, 2, 3);
  const auto c = predict(cfg, params, images, 8, 1);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] == c[i]);
  }
}
