#include "chromseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace chromseg::ops {

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Unfolds one (c, h, w) sample into a (c*k*k, h*w) patch matrix with zero padding.
template <class T>
void im2col(const T* src, int channels, int h, int w, int k, T* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky - pad;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          T* out = row + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, T{});
            continue;
          }
          const T* in = plane + static_cast<std::size_t>(sy) * w;
          std::fill(out, out + x_lo, T{});
          for (int x = x_lo; x < x_hi; ++x) out[x] = in[x + dx];
          std::fill(out + std::max(x_lo, x_hi), out + w, T{});
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch gradients back onto the image.
template <class T>
void col2im(const T* cols, int channels, int h, int w, int k, T* dst) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky - pad;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* in = row + static_cast<std::size_t>(y) * w;
          T* out = plane + static_cast<std::size_t>(sy) * w;
          for (int x = x_lo; x < x_hi; ++x) out[x + dx] += in[x];
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw StructuralError(what);
}

}  // namespace

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvKernel<T>& kernel) {
  require(input.c() == kernel.in_channels,
          "conv2d: input has " + std::to_string(input.c()) + " channels, kernel expects " +
              std::to_string(kernel.in_channels));
  require(kernel.weights.size() ==
                  static_cast<std::size_t>(kernel.out_channels) * kernel.in_channels * kernel.ksize * kernel.ksize &&
              kernel.bias.size() == static_cast<std::size_t>(kernel.out_channels),
          "conv2d: kernel storage does not match its dims");
  if (!input.all_finite()) throw NumericalError("conv2d: non-finite input");

  const int n = input.n(), h = input.h(), w = input.w(), k = kernel.ksize;
  const int rows = kernel.in_channels * k * k;
  const int hw = h * w;
  Tensor4<T> out(n, kernel.out_channels, h, w);
  // Eigen-owned operands only: vectorised kernels peel by address, so
  // operands at arbitrary heap alignment would change the summation order.
  const RowMatrix<T> wm = ConstMatMap<T>(kernel.weights.data(), kernel.out_channels, rows);
  RowMatrix<T> cols(rows, hw);
  RowMatrix<T> om(kernel.out_channels, hw);

  for (int b = 0; b < n; ++b) {
    im2col(input.data().data() + input.index(b, 0, 0, 0), input.c(), h, w, k, cols.data());
    om.noalias() = wm * cols;
    T* dst = out.data().data() + out.index(b, 0, 0, 0);
    for (int o = 0; o < kernel.out_channels; ++o)
      for (int i = 0; i < hw; ++i) dst[static_cast<std::size_t>(o) * hw + i] = om(o, i) + kernel.bias[o];
  }
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvKernel<T>& kernel,
                             const Tensor4<T>& upstream) {
  require(input.c() == kernel.in_channels, "conv2d_backward: channel mismatch");
  const Shape4 expect{input.n(), kernel.out_channels, input.h(), input.w()};
  require(upstream.shape() == expect, "conv2d_backward: upstream dims " + upstream.shape().str() +
                                          " differ from forward output " + expect.str());

  const int n = input.n(), h = input.h(), w = input.w(), k = kernel.ksize;
  const int rows = kernel.in_channels * k * k;
  const int hw = h * w;

  ConvGrads<T> g{Tensor4<T>(input.shape()), std::vector<T>(kernel.weights.size(), T{}),
                 std::vector<T>(kernel.bias.size(), T{})};
  const RowMatrix<T> wm = ConstMatMap<T>(kernel.weights.data(), kernel.out_channels, rows);
  RowMatrix<T> cols(rows, hw), gcols(rows, hw), um(kernel.out_channels, hw);
  RowMatrix<T> gw = RowMatrix<T>::Zero(kernel.out_channels, rows);

  for (int b = 0; b < n; ++b) {
    im2col(input.data().data() + input.index(b, 0, 0, 0), input.c(), h, w, k, cols.data());
    um = ConstMatMap<T>(upstream.data().data() + upstream.index(b, 0, 0, 0), kernel.out_channels, hw);
    gw.noalias() += um * cols.transpose();
    for (int o = 0; o < kernel.out_channels; ++o) {
      T sum{};
      for (int i = 0; i < hw; ++i) sum += um(o, i);
      g.bias[o] += sum;
    }
    gcols.noalias() = wm.transpose() * um;
    col2im(gcols.data(), input.c(), h, w, k, g.input.data().data() + g.input.index(b, 0, 0, 0));
  }
  MatMap<T>(g.weights.data(), kernel.out_channels, rows) = gw;
  return g;
}

template <class T>
PoolResult<T> maxpool2x2_forward(const Tensor4<T>& input) {
  require(input.h() % 2 == 0 && input.w() % 2 == 0,
          "maxpool2x2: spatial dims must be even, got " + input.shape().str());
  const int oh = input.h() / 2, ow = input.w() / 2;
  PoolResult<T> r{Tensor4<T>(input.n(), input.c(), oh, ow), PoolIndices{input.shape(), {}}};
  r.indices.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int b = 0; b < input.n(); ++b)
    for (int c = 0; c < input.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x, ++o) {
          std::size_t best = input.index(b, c, 2 * y, 2 * x);
          T best_v = input.vec()[best];
          const std::size_t candidates[3] = {input.index(b, c, 2 * y, 2 * x + 1),
                                             input.index(b, c, 2 * y + 1, 2 * x),
                                             input.index(b, c, 2 * y + 1, 2 * x + 1)};
          for (std::size_t idx : candidates) {
            if (input.vec()[idx] > best_v) {
              best_v = input.vec()[idx];
              best = idx;
            }
          }
          r.output.vec()[o] = best_v;
          r.indices.argmax[o] = static_cast<std::uint32_t>(best);
        }
  return r;
}

template <class T>
Tensor4<T> maxpool2x2_backward(const Tensor4<T>& upstream, const PoolIndices& indices) {
  require(upstream.size() == indices.argmax.size(), "maxpool2x2_backward: upstream/index count mismatch");
  const Shape4& in = indices.input_shape;
  require(upstream.shape() == Shape4{in.n, in.c, in.h / 2, in.w / 2},
          "maxpool2x2_backward: upstream dims do not match pooled dims");
  Tensor4<T> grad(in);
  const std::size_t limit = in.count();
  for (std::size_t i = 0; i < indices.argmax.size(); ++i) {
    const std::size_t idx = indices.argmax[i];
    require(idx < limit, "maxpool2x2_backward: argmax index out of range");
    grad.vec()[idx] += upstream.vec()[i];
  }
  return grad;
}

template <class T>
Tensor4<T> upsample2x_nearest(const Tensor4<T>& input) {
  Tensor4<T> out(input.n(), input.c(), input.h() * 2, input.w() * 2);
  for (int b = 0; b < input.n(); ++b)
    for (int c = 0; c < input.c(); ++c)
      for (int y = 0; y < out.h(); ++y) {
        const T* src = input.data().data() + input.index(b, c, y / 2, 0);
        T* dst = out.data().data() + out.index(b, c, y, 0);
        for (int x = 0; x < out.w(); ++x) dst[x] = src[x / 2];
      }
  return out;
}

template <class T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& upstream) {
  require(upstream.h() % 2 == 0 && upstream.w() % 2 == 0, "upsample2x_backward: odd upstream dims");
  Tensor4<T> grad(upstream.n(), upstream.c(), upstream.h() / 2, upstream.w() / 2);
  for (int b = 0; b < upstream.n(); ++b)
    for (int c = 0; c < upstream.c(); ++c)
      for (int y = 0; y < upstream.h(); ++y) {
        const T* src = upstream.data().data() + upstream.index(b, c, y, 0);
        T* dst = grad.data().data() + grad.index(b, c, y / 2, 0);
        for (int x = 0; x < upstream.w(); ++x) dst[x / 2] += src[x];
      }
  return grad;
}

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
  Tensor4<T> out(input.shape());
  std::transform(input.vec().begin(), input.vec().end(), out.vec().begin(),
                 [](T v) { return v > T{0} ? v : T{0}; });
  return out;
}

template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& upstream) {
  require(input.shape() == upstream.shape(), "relu_backward: shape mismatch");
  Tensor4<T> grad(input.shape());
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad.vec()[i] = input.vec()[i] > T{0} ? upstream.vec()[i] : T{0};
  return grad;
}

template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
          "concat_channels: " + a.shape().str() + " and " + b.shape().str() + " differ outside channels");
  Tensor4<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  const std::size_t hw = static_cast<std::size_t>(a.h()) * a.w();
  for (int n = 0; n < a.n(); ++n) {
    auto ap = a.data().subspan(a.index(n, 0, 0, 0), a.c() * hw);
    auto bp = b.data().subspan(b.index(n, 0, 0, 0), b.c() * hw);
    std::copy(ap.begin(), ap.end(), out.vec().begin() + out.index(n, 0, 0, 0));
    std::copy(bp.begin(), bp.end(), out.vec().begin() + out.index(n, a.c(), 0, 0));
  }
  return out;
}

template <class T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, int first_channels) {
  require(first_channels >= 0 && first_channels <= t.c(), "split_channels: split point out of range");
  Tensor4<T> a(t.n(), first_channels, t.h(), t.w());
  Tensor4<T> b(t.n(), t.c() - first_channels, t.h(), t.w());
  const std::size_t hw = static_cast<std::size_t>(t.h()) * t.w();
  for (int n = 0; n < t.n(); ++n) {
    auto src = t.data().subspan(t.index(n, 0, 0, 0), t.c() * hw);
    std::copy(src.begin(), src.begin() + first_channels * hw, a.vec().begin() + a.index(n, 0, 0, 0));
    std::copy(src.begin() + first_channels * hw, src.end(), b.vec().begin() + b.index(n, 0, 0, 0));
  }
  return {std::move(a), std::move(b)};
}

template <class T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
  Tensor4<T> p(logits.shape());
  const int C = logits.c();
  for (int n = 0; n < logits.n(); ++n)
    for (int y = 0; y < logits.h(); ++y)
      for (int x = 0; x < logits.w(); ++x) {
        T m = -std::numeric_limits<T>::infinity();
        for (int c = 0; c < C; ++c) m = std::max(m, logits(n, c, y, x));
        T z{0};
        for (int c = 0; c < C; ++c) z += (p(n, c, y, x) = std::exp(logits(n, c, y, x) - m));
        for (int c = 0; c < C; ++c) p(n, c, y, x) /= z;
      }
  return p;
}

template <class T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, std::span<const std::uint8_t> labels,
                                    const std::optional<ClassWeights>& class_weights) {
  require(logits.c() == 4, "softmax_cross_entropy: logits must have 4 channels");
  const std::size_t pixels = static_cast<std::size_t>(logits.n()) * logits.h() * logits.w();
  require(labels.size() == pixels, "softmax_cross_entropy: label count " + std::to_string(labels.size()) +
                                       " != pixel count " + std::to_string(pixels));
  for (std::uint8_t y : labels)
    require(y <= 3, "softmax_cross_entropy: label " + std::to_string(y) + " outside 0..3");
  if (!logits.all_finite()) throw NumericalError("softmax_cross_entropy: non-finite logits");

  LossResult<T> r{T{0}, Tensor4<T>(logits.shape())};
  if (pixels == 0) return r;
  const T inv = T{1} / static_cast<T>(pixels);
  const int h = logits.h(), w = logits.w();
  std::size_t p = 0;
  double total = 0.0;
  for (int n = 0; n < logits.n(); ++n)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x, ++p) {
        T z[4];
        T m = logits(n, 0, y, x);
        for (int c = 1; c < 4; ++c) m = std::max(m, logits(n, c, y, x));
        T sum{0};
        for (int c = 0; c < 4; ++c) sum += (z[c] = std::exp(logits(n, c, y, x) - m));
        const int label = labels[p];
        const T wt = class_weights ? static_cast<T>((*class_weights)[label]) : T{1};
        const T log_p = logits(n, label, y, x) - m - std::log(sum);
        total -= static_cast<double>(wt * log_p);
        for (int c = 0; c < 4; ++c) {
          const T prob = z[c] / sum;
          r.grad(n, c, y, x) = wt * (prob - (c == label ? T{1} : T{0})) * inv;
        }
      }
  r.loss = static_cast<T>(total / static_cast<double>(pixels));
  return r;
}

#define CHROMSEG_INSTANTIATE(T)                                                                   \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, const ConvKernel<T>&);                   \
  template ConvGrads<T> conv2d_backward(const Tensor4<T>&, const ConvKernel<T>&, const Tensor4<T>&); \
  template PoolResult<T> maxpool2x2_forward(const Tensor4<T>&);                                   \
  template Tensor4<T> maxpool2x2_backward(const Tensor4<T>&, const PoolIndices&);                 \
  template Tensor4<T> upsample2x_nearest(const Tensor4<T>&);                                      \
  template Tensor4<T> upsample2x_backward(const Tensor4<T>&);                                     \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                            \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                        \
  template Tensor4<T> concat_channels(const Tensor4<T>&, const Tensor4<T>&);                      \
  template std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>&, int);              \
  template Tensor4<T> softmax(const Tensor4<T>&);                                                 \
  template LossResult<T> softmax_cross_entropy(const Tensor4<T>&, std::span<const std::uint8_t>, \
                                               const std::optional<ClassWeights>&);

CHROMSEG_INSTANTIATE(float)
CHROMSEG_INSTANTIATE(double)

#undef CHROMSEG_INSTANTIATE

}  // namespace chromseg::ops
