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

#ifndef ASEG_TENSOR_HPP
#define ASEG_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aseg/errors.hpp"

namespace aseg {

using Index = Eigen::Index;

/// Extents of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
  Index n = 1;
  Index c = 1;
  Index h = 1;
  Index w = 1;

  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

  // Element count, with overflow detection.
  Index count() const {
    constexpr Index kMax = std::numeric_limits<Index>::max();
    Index total = 1;
    for (Index d : {n, c, h, w}) {
      if (d < 1) throw ShapeError("non-positive dimension in " + str());
      if (total > kMax / d) throw SizeError("element count overflows for " + str());
      total *= d;
    }
    return total;
  }

  Index pixels() const { return h * w; }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense n-major (n, c, h, w) tensor. All values of one channel plane are
/// contiguous, so a sample is a row-major (channels x pixels) matrix.
template <typename Scalar_>
class Tensor4 {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor4() = default;

  explicit Tensor4(const Shape& shape) : shape_(shape), data_(Vector::Zero(shape.count())) {}

  Tensor4(const Shape& shape, Vector data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " +
                       shape_.str());
    }
  }

  static Tensor4 constant(const Shape& shape, Scalar value) {
    return Tensor4(shape, Vector::Constant(shape.count(), value));
  }

  const Shape& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  auto array() { return data_.array(); }
  auto array() const { return data_.array(); }

  Scalar* plane(Index n, Index c) { return data_.data() + offset(n, c, 0, 0); }
  const Scalar* plane(Index n, Index c) const { return data_.data() + offset(n, c, 0, 0); }

  /// Sample `n` as a (channels x pixels) row-major matrix view.
  MatrixMap sample(Index n) { return MatrixMap(plane(n, 0), shape_.c, shape_.pixels()); }
  ConstMatrixMap sample(Index n) const {
    return ConstMatrixMap(plane(n, 0), shape_.c, shape_.pixels());
  }

  Index offset(Index n, Index c, Index y, Index x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  void set_zero() { data_.setZero(); }

 private:
  Shape shape_{0, 0, 0, 0};
  Vector data_;
};

using Tensor = Tensor4<double>;

// ---------------------------------------------------------------------------
// Construction and pointwise primitives.

template <typename Scalar = double>
Tensor4<Scalar> zeros(const Shape& shape) {
  if (!shape.valid()) throw ShapeError("invalid shape " + shape.str());
  return Tensor4<Scalar>(shape);
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename Scalar>
Tensor4<Scalar> add(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  return Tensor4<Scalar>(a.shape(), a.vec() + b.vec());
}

template <typename Scalar>
Tensor4<Scalar> mul(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  return Tensor4<Scalar>(a.shape(), a.vec().cwiseProduct(b.vec()));
}

template <typename Scalar>
Tensor4<Scalar> relu(const Tensor4<Scalar>& x) {
  return Tensor4<Scalar>(x.shape(), x.vec().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor4<Scalar> scale(const Tensor4<Scalar>& x, Scalar alpha) {
  return Tensor4<Scalar>(x.shape(), alpha * x.vec());
}

/// Gradient of relu: passes dy where the forward input was positive.
template <typename Scalar>
Tensor4<Scalar> relu_backward(const Tensor4<Scalar>& x, const Tensor4<Scalar>& dy) {
  require_same_shape(x.shape(), dy.shape(), "relu_backward");
  return Tensor4<Scalar>(x.shape(),
                         (x.array() > Scalar(0)).select(dy.array(), Scalar(0)).matrix());
}

template <typename Scalar>
Scalar dot(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  return a.vec().dot(b.vec());
}

// ---------------------------------------------------------------------------
// Channel concatenation and slicing.

template <typename Scalar>
Tensor4<Scalar> concat_channels(std::span<const Tensor4<Scalar>* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape& first = parts.front()->shape();
  Index channels = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
  }
  Tensor4<Scalar> out(Shape{first.n, channels, first.h, first.w});
  for (Index n = 0; n < first.n; ++n) {
    Index c0 = 0;
    for (const auto* p : parts) {
      out.sample(n).middleRows(c0, p->c()) = p->sample(n);
      c0 += p->c();
    }
  }
  return out;
}

template <typename Scalar>
Tensor4<Scalar> concat_channels(const std::vector<Tensor4<Scalar>>& parts) {
  std::vector<const Tensor4<Scalar>*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat_channels<Scalar>(std::span<const Tensor4<Scalar>* const>(ptrs));
}

/// Channels [begin, begin + count) of x.
template <typename Scalar>
Tensor4<Scalar> slice_channels(const Tensor4<Scalar>& x, Index begin, Index count) {
  if (begin < 0 || count < 1 || begin + count > x.c()) {
    throw ShapeError("slice_channels: range out of bounds for " + x.shape().str());
  }
  Tensor4<Scalar> out(Shape{x.n(), count, x.h(), x.w()});
  for (Index n = 0; n < x.n(); ++n) out.sample(n) = x.sample(n).middleRows(begin, count);
  return out;
}

// ---------------------------------------------------------------------------
// Bilinear resize with align-corners sampling.

namespace detail {

struct LerpTap {
  Index lo = 0;
  Index hi = 0;
  double frac = 0.0;
};

// Source taps for one axis: src = dst * (in - 1) / (out - 1), out == 1 samples 0.
inline std::vector<LerpTap> lerp_taps(Index in, Index out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  for (Index i = 0; i < out; ++i) {
    const double src =
        out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
    Index lo = static_cast<Index>(src);
    if (lo > in - 1) lo = in - 1;
    const Index hi = lo + 1 < in ? lo + 1 : lo;
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

template <typename Scalar>
Tensor4<Scalar> bilinear_resize(const Tensor4<Scalar>& x, Index out_h, Index out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output dims must be >= 1");
  if (out_h == x.h() && out_w == x.w()) return x;
  const auto ty = detail::lerp_taps(x.h(), out_h);
  const auto tx = detail::lerp_taps(x.w(), out_w);
  Tensor4<Scalar> out(Shape{x.n(), x.c(), out_h, out_w});
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(n, c);
      Scalar* dst = out.plane(n, c);
      for (Index y = 0; y < out_h; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        const Scalar* r0 = src + a.lo * x.w();
        const Scalar* r1 = src + a.hi * x.w();
        const Scalar fy = static_cast<Scalar>(a.frac);
        for (Index xx = 0; xx < out_w; ++xx) {
          const auto& b = tx[static_cast<std::size_t>(xx)];
          const Scalar fx = static_cast<Scalar>(b.frac);
          const Scalar top = r0[b.lo] * (Scalar(1) - fx) + r0[b.hi] * fx;
          const Scalar bot = r1[b.lo] * (Scalar(1) - fx) + r1[b.hi] * fx;
          dst[y * out_w + xx] = top * (Scalar(1) - fy) + bot * fy;
        }
      }
    }
  }
  return out;
}

/// Adjoint of bilinear_resize: scatters dy back onto an (in_h, in_w) grid.
template <typename Scalar>
Tensor4<Scalar> bilinear_resize_backward(const Tensor4<Scalar>& dy, Index in_h, Index in_w) {
  if (dy.h() == in_h && dy.w() == in_w) return dy;
  const auto ty = detail::lerp_taps(in_h, dy.h());
  const auto tx = detail::lerp_taps(in_w, dy.w());
  Tensor4<Scalar> dx(Shape{dy.n(), dy.c(), in_h, in_w});
  for (Index n = 0; n < dy.n(); ++n) {
    for (Index c = 0; c < dy.c(); ++c) {
      const Scalar* g = dy.plane(n, c);
      Scalar* d = dx.plane(n, c);
      for (Index y = 0; y < dy.h(); ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        const Scalar fy = static_cast<Scalar>(a.frac);
        for (Index xx = 0; xx < dy.w(); ++xx) {
          const auto& b = tx[static_cast<std::size_t>(xx)];
          const Scalar fx = static_cast<Scalar>(b.frac);
          const Scalar v = g[y * dy.w() + xx];
          d[a.lo * in_w + b.lo] += v * (Scalar(1) - fy) * (Scalar(1) - fx);
          d[a.lo * in_w + b.hi] += v * (Scalar(1) - fy) * fx;
          d[a.hi * in_w + b.lo] += v * fy * (Scalar(1) - fx);
          d[a.hi * in_w + b.hi] += v * fy * fx;
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Zero padding and mirroring.

template <typename Scalar>
Tensor4<Scalar> pad_zero(const Tensor4<Scalar>& x, Index top, Index bottom, Index left, Index right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad_zero: negative pad");
  Tensor4<Scalar> out(Shape{x.n(), x.c(), x.h() + top + bottom, x.w() + left + right});
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      for (Index y = 0; y < x.h(); ++y) {
        std::copy_n(x.plane(n, c) + y * x.w(), x.w(), out.plane(n, c) + (y + top) * out.w() + left);
      }
    }
  }
  return out;
}

/// Left-right mirror of every plane.
template <typename Scalar>
Tensor4<Scalar> flip_horizontal(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> out(x.shape());
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      for (Index y = 0; y < x.h(); ++y) {
        const Scalar* src = x.plane(n, c) + y * x.w();
        Scalar* dst = out.plane(n, c) + y * x.w();
        for (Index xx = 0; xx < x.w(); ++xx) dst[xx] = src[x.w() - 1 - xx];
      }
    }
  }
  return out;
}

template <typename Scalar>
bool all_finite(const Tensor4<Scalar>& x) {
  return x.vec().allFinite();
}

}  // namespace aseg

#endif  // ASEG_TENSOR_HPP
