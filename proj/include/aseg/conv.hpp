// Copyright 2026 The aseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Atrous (dilated) convolution family.
//
// Every convolution here evaluates
//
//   y[i] = sum_k x[s*i - p + r*k] * w[k]
//
// per spatial axis, with stride s, atrous rate r and leading pad p. Kernels are
// odd-sized so SAME padding is symmetric: p = (k - 1) * r / 2, which keeps the
// output size at ceil(in / s) for every rate. Weights are laid out as
// (out_channels, in_channels, kh, kw); depthwise kernels use (channels, 1, kh, kw).
//
// Dense convolution lowers to one GEMM per sample over an im2col buffer.
// Depthwise convolution runs as direct per-tap loops.

#ifndef ASEG_CONV_HPP
#define ASEG_CONV_HPP

#include <algorithm>
#include <string>

#include "aseg/tensor.hpp"

namespace aseg {

enum class Padding { same, valid };

struct ConvGeometry {
  Index stride = 1;
  Index rate = 1;
  Padding padding = Padding::same;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// Spatial extent covered by k taps at rate r.
inline Index effective_extent(Index kernel, Index rate) { return kernel + (kernel - 1) * (rate - 1); }

struct AxisPlan {
  Index out = 0;
  Index pad = 0;  // leading pad
};

inline AxisPlan plan_axis(Index in, Index kernel, const ConvGeometry& g) {
  if (g.stride < 1 || g.rate < 1) throw ShapeError("conv geometry: stride and rate must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) {
    throw ShapeError("conv geometry: kernel extent " + std::to_string(kernel) + " must be odd");
  }
  const Index extent = effective_extent(kernel, g.rate);
  if (g.padding == Padding::same) {
    return {(in + g.stride - 1) / g.stride, (extent - 1) / 2};
  }
  if (extent > in) {
    throw ShapeError("conv: VALID padding with effective kernel " + std::to_string(extent) +
                     " larger than input " + std::to_string(in) + " gives empty output");
  }
  return {(in - extent) / g.stride + 1, 0};
}

inline Shape conv_output_shape(const Shape& in, Index out_channels, Index kh, Index kw,
                               const ConvGeometry& g) {
  return {in.n, out_channels, plan_axis(in.h, kh, g).out, plan_axis(in.w, kw, g).out};
}

namespace detail {

// First and one-past-last output index o with 0 <= o*s - p + t < in.
inline std::pair<Index, Index> valid_range(Index in, Index out, Index stride, Index offset) {
  // offset = t - p; need o*s + offset in [0, in)
  Index lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  Index hi = in - offset <= 0 ? 0 : (in - 1 - offset) / stride + 1;
  lo = std::min(lo, out);
  hi = std::clamp(hi, lo, out);
  return {lo, hi};
}

struct ConvPlan {
  Index kh, kw;
  AxisPlan ya, xa;
  ConvGeometry g;
};

template <typename Scalar>
void im2col(const Scalar* x, Index channels, Index in_h, Index in_w, const ConvPlan& cp,
            typename Tensor4<Scalar>::RowMatrix& col) {
  const Index out_h = cp.ya.out;
  const Index out_w = cp.xa.out;
  col.resize(channels * cp.kh * cp.kw, out_h * out_w);
  const Index s = cp.g.stride;
  const Index r = cp.g.rate;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = x + c * in_h * in_w;
    for (Index ky = 0; ky < cp.kh; ++ky) {
      const auto [y0, y1] = valid_range(in_h, out_h, s, ky * r - cp.ya.pad);
      for (Index kx = 0; kx < cp.kw; ++kx) {
        const Index xoff = kx * r - cp.xa.pad;
        const auto [x0, x1] = valid_range(in_w, out_w, s, xoff);
        Scalar* row = col.row((c * cp.kh + ky) * cp.kw + kx).data();
        std::fill(row, row + out_h * out_w, Scalar(0));
        for (Index oy = y0; oy < y1; ++oy) {
          const Scalar* src = plane + (oy * s + ky * r - cp.ya.pad) * in_w;
          Scalar* dst = row + oy * out_w;
          if (s == 1) {
            std::copy(src + x0 + xoff, src + x1 + xoff, dst + x0);
          } else {
            for (Index ox = x0; ox < x1; ++ox) dst[ox] = src[ox * s + xoff];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const typename Tensor4<Scalar>::RowMatrix& col, Index channels, Index in_h, Index in_w,
            const ConvPlan& cp, Scalar* dx) {
  const Index out_h = cp.ya.out;
  const Index out_w = cp.xa.out;
  const Index s = cp.g.stride;
  const Index r = cp.g.rate;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = dx + c * in_h * in_w;
    for (Index ky = 0; ky < cp.kh; ++ky) {
      const auto [y0, y1] = valid_range(in_h, out_h, s, ky * r - cp.ya.pad);
      for (Index kx = 0; kx < cp.kw; ++kx) {
        const Index xoff = kx * r - cp.xa.pad;
        const auto [x0, x1] = valid_range(in_w, out_w, s, xoff);
        const Scalar* row = col.row((c * cp.kh + ky) * cp.kw + kx).data();
        for (Index oy = y0; oy < y1; ++oy) {
          Scalar* dst = plane + (oy * s + ky * r - cp.ya.pad) * in_w;
          const Scalar* src = row + oy * out_w;
          for (Index ox = x0; ox < x1; ++ox) dst[ox * s + xoff] += src[ox];
        }
      }
    }
  }
}

inline bool is_plain_pointwise(const ConvPlan& cp) {
  return cp.kh == 1 && cp.kw == 1 && cp.g.stride == 1;
}

inline ConvPlan make_plan(const Shape& in, Index kh, Index kw, const ConvGeometry& g) {
  return {kh, kw, plan_axis(in.h, kh, g), plan_axis(in.w, kw, g), g};
}

}  // namespace detail

template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& x, const Tensor4<Scalar>& w, const ConvGeometry& g) {
  if (w.c() != x.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c()) + " channels, kernel expects " +
                     std::to_string(w.c()));
  }
  const auto cp = detail::make_plan(x.shape(), w.h(), w.w(), g);
  Tensor4<Scalar> y(Shape{x.n(), w.n(), cp.ya.out, cp.xa.out});
  typename Tensor4<Scalar>::ConstMatrixMap wm(w.data(), w.n(), w.c() * w.h() * w.w());
  if (detail::is_plain_pointwise(cp)) {
    for (Index n = 0; n < x.n(); ++n) y.sample(n).noalias() = wm * x.sample(n);
    return y;
  }
  typename Tensor4<Scalar>::RowMatrix col;
  for (Index n = 0; n < x.n(); ++n) {
    detail::im2col(x.plane(n, 0), x.c(), x.h(), x.w(), cp, col);
    y.sample(n).noalias() = wm * col;
  }
  return y;
}

template <typename Scalar>
struct ConvGrads {
  Tensor4<Scalar> dx;  // empty when the input gradient was not requested
  Tensor4<Scalar> dw;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor4<Scalar>& x, const Tensor4<Scalar>& w,
                                  const ConvGeometry& g, const Tensor4<Scalar>& dy,
                                  bool input_grad = true) {
  if (w.c() != x.c()) throw ShapeError("conv2d_backward: channel mismatch");
  const auto cp = detail::make_plan(x.shape(), w.h(), w.w(), g);
  require_same_shape(dy.shape(), Shape{x.n(), w.n(), cp.ya.out, cp.xa.out}, "conv2d_backward dy");
  ConvGrads<Scalar> grads;
  grads.dw = Tensor4<Scalar>(w.shape());
  if (input_grad) grads.dx = Tensor4<Scalar>(x.shape());
  const Index k = w.c() * w.h() * w.w();
  typename Tensor4<Scalar>::ConstMatrixMap wm(w.data(), w.n(), k);
  typename Tensor4<Scalar>::MatrixMap dwm(grads.dw.data(), w.n(), k);
  if (detail::is_plain_pointwise(cp)) {
    for (Index n = 0; n < x.n(); ++n) {
      dwm.noalias() += dy.sample(n) * x.sample(n).transpose();
      if (input_grad) grads.dx.sample(n).noalias() = wm.transpose() * dy.sample(n);
    }
    return grads;
  }
  typename Tensor4<Scalar>::RowMatrix col;
  typename Tensor4<Scalar>::RowMatrix dcol;
  for (Index n = 0; n < x.n(); ++n) {
    detail::im2col(x.plane(n, 0), x.c(), x.h(), x.w(), cp, col);
    dwm.noalias() += dy.sample(n) * col.transpose();
    if (input_grad) {
      dcol.noalias() = wm.transpose() * dy.sample(n);
      detail::col2im(dcol, x.c(), x.h(), x.w(), cp, grads.dx.plane(n, 0));
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Depthwise convolution: one kh x kw filter per input channel.

template <typename Scalar>
Tensor4<Scalar> depthwise_conv2d(const Tensor4<Scalar>& x, const Tensor4<Scalar>& w,
                                 const ConvGeometry& g) {
  if (w.n() != x.c() || w.c() != 1) {
    throw ShapeError("depthwise_conv2d: expected (" + std::to_string(x.c()) +
                     ",1,kh,kw) filters, got " + w.shape().str());
  }
  const auto cp = detail::make_plan(x.shape(), w.h(), w.w(), g);
  const Index oh = cp.ya.out, ow = cp.xa.out, s = g.stride, r = g.rate;
  Tensor4<Scalar> y(Shape{x.n(), x.c(), oh, ow});
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(n, c);
      Scalar* dst = y.plane(n, c);
      const Scalar* filt = w.plane(c, 0);
      for (Index ky = 0; ky < w.h(); ++ky) {
        const auto [y0, y1] = detail::valid_range(x.h(), oh, s, ky * r - cp.ya.pad);
        for (Index kx = 0; kx < w.w(); ++kx) {
          const Scalar wv = filt[ky * w.w() + kx];
          const Index xoff = kx * r - cp.xa.pad;
          const auto [x0, x1] = detail::valid_range(x.w(), ow, s, xoff);
          for (Index oy = y0; oy < y1; ++oy) {
            const Scalar* row = src + (oy * s + ky * r - cp.ya.pad) * x.w();
            Scalar* out = dst + oy * ow;
            for (Index ox = x0; ox < x1; ++ox) out[ox] += wv * row[ox * s + xoff];
          }
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
ConvGrads<Scalar> depthwise_conv2d_backward(const Tensor4<Scalar>& x, const Tensor4<Scalar>& w,
                                            const ConvGeometry& g, const Tensor4<Scalar>& dy,
                                            bool input_grad = true) {
  if (w.n() != x.c() || w.c() != 1) throw ShapeError("depthwise_conv2d_backward: filter mismatch");
  const auto cp = detail::make_plan(x.shape(), w.h(), w.w(), g);
  const Index oh = cp.ya.out, ow = cp.xa.out, s = g.stride, r = g.rate;
  require_same_shape(dy.shape(), Shape{x.n(), x.c(), oh, ow}, "depthwise_conv2d_backward dy");
  ConvGrads<Scalar> grads;
  grads.dw = Tensor4<Scalar>(w.shape());
  if (input_grad) grads.dx = Tensor4<Scalar>(x.shape());
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(n, c);
      const Scalar* grad = dy.plane(n, c);
      const Scalar* filt = w.plane(c, 0);
      Scalar* dfilt = grads.dw.plane(c, 0);
      Scalar* dsrc = input_grad ? grads.dx.plane(n, c) : nullptr;
      for (Index ky = 0; ky < w.h(); ++ky) {
        const auto [y0, y1] = detail::valid_range(x.h(), oh, s, ky * r - cp.ya.pad);
        for (Index kx = 0; kx < w.w(); ++kx) {
          const Scalar wv = filt[ky * w.w() + kx];
          const Index xoff = kx * r - cp.xa.pad;
          const auto [x0, x1] = detail::valid_range(x.w(), ow, s, xoff);
          Scalar acc = 0;
          for (Index oy = y0; oy < y1; ++oy) {
            const Index iy = oy * s + ky * r - cp.ya.pad;
            const Scalar* row = src + iy * x.w();
            const Scalar* g_row = grad + oy * ow;
            for (Index ox = x0; ox < x1; ++ox) acc += g_row[ox] * row[ox * s + xoff];
            if (dsrc != nullptr) {
              Scalar* d_row = dsrc + iy * x.w();
              for (Index ox = x0; ox < x1; ++ox) d_row[ox * s + xoff] += wv * g_row[ox];
            }
          }
          dfilt[ky * w.w() + kx] += acc;
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Pointwise and separable convolution.

template <typename Scalar>
Tensor4<Scalar> pointwise_conv2d(const Tensor4<Scalar>& x, const Tensor4<Scalar>& w) {
  if (w.h() != 1 || w.w() != 1) {
    throw ShapeError("pointwise_conv2d: kernel must be 1x1, got " + w.shape().str());
  }
  return conv2d(x, w, ConvGeometry{});
}

/// Depthwise stage (atrous when g.rate > 1) followed by a 1x1 projection.
template <typename Scalar>
Tensor4<Scalar> separable_conv2d(const Tensor4<Scalar>& x, const Tensor4<Scalar>& depth_w,
                                 const Tensor4<Scalar>& point_w, const ConvGeometry& g) {
  return pointwise_conv2d(depthwise_conv2d(x, depth_w, g), point_w);
}

}  // namespace aseg

#endif  // ASEG_CONV_HPP
