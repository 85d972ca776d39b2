#pragma once

// Shared helpers for the test binaries: independent reference implementations
// and small synthetic inputs with hand-known answers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "chromseg/dataset.hpp"
#include "chromseg/ops.hpp"
#include "chromseg/raster.hpp"
#include "chromseg/rng.hpp"
#include "chromseg/tensor.hpp"

namespace fixtures {

using namespace chromseg;

template <class T>
Tensor4<T> random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <class T>
ConvKernel<T> random_kernel(int out, int in, int k, Rng& rng) {
  ConvKernel<T> ker(out, in, k);
  for (auto& v : ker.weights) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (auto& v : ker.bias) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return ker;
}

// Direct six-loop convolution with explicit zero padding.
template <class T>
Tensor4<T> naive_conv(const Tensor4<T>& in, const ConvKernel<T>& k) {
  const int pad = k.ksize / 2;
  Tensor4<T> out(in.n(), k.out_channels, in.h(), in.w());
  for (int n = 0; n < in.n(); ++n)
    for (int o = 0; o < k.out_channels; ++o)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          double acc = k.bias[o];
          for (int i = 0; i < k.in_channels; ++i)
            for (int ky = 0; ky < k.ksize; ++ky)
              for (int kx = 0; kx < k.ksize; ++kx) {
                const int sy = y + ky - pad, sx = x + kx - pad;
                if (sy < 0 || sx < 0 || sy >= in.h() || sx >= in.w()) continue;
                acc += static_cast<double>(k.weight(o, i, ky, kx)) * in(n, i, sy, sx);
              }
          out(n, o, y, x) = static_cast<T>(acc);
        }
  return out;
}

// Central difference of f around v[i].
inline double central_difference(std::vector<double>& v, std::size_t i, const std::function<double()>& f,
                                 double h = 1e-4) {
  const double saved = v[i];
  v[i] = saved + h;
  const double up = f();
  v[i] = saved - h;
  const double down = f();
  v[i] = saved;
  return (up - down) / (2 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Two bars crossing at right angles: horizontal bar label 1, vertical bar
// label 2, shared square 3. Single-bar intensity is `single`, overlap `both`.
struct CrossSpec {
  int height = 64;
  int width = 64;
  int h_row = 32;      // centre row of the horizontal bar
  int v_col = 32;      // centre column of the vertical bar
  int half_thick = 3;  // bar half-thickness
  int h_from = 8, h_to = 56;
  int v_from = 8, v_to = 56;
  float single = 0.3f;
  float both = 0.6f;
};

inline Sample cross_sample(const CrossSpec& s) {
  Sample out;
  out.image = GrayImage(s.height, s.width, 0.0f);
  out.label = LabelMap(s.height, s.width, 0);
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c) {
      const bool h = std::abs(r - s.h_row) <= s.half_thick && c >= s.h_from && c <= s.h_to;
      const bool v = std::abs(c - s.v_col) <= s.half_thick && r >= s.v_from && r <= s.v_to;
      const std::uint8_t l = static_cast<std::uint8_t>((h ? 1 : 0) + (v ? 2 : 0));
      out.label(r, c) = l;
      out.image(r, c) = l == 3 ? s.both : (l ? s.single : 0.0f);
    }
  return out;
}

inline Mask foreground(const LabelMap& label) {
  Mask m(label.height, label.width, 0);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = label.data[i] != 0;
  return m;
}

// Brute-force count of nonzero 8-neighbours.
inline int nonzero_neighbours(const LabelMap& l, int r, int c) {
  int n = 0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc)
      if ((dr || dc) && l.at_or(r + dr, c + dc, 0) != 0) ++n;
  return n;
}

inline LabelMap random_labels(int h, int w, Rng& rng, int max_label = 3) {
  LabelMap l(h, w);
  for (auto& v : l.data) v = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(max_label) + 1));
  return l;
}

}  // namespace fixtures
