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

// Batch normalization, pooling, bias and the segmentation loss.

#ifndef ASEG_NN_HPP
#define ASEG_NN_HPP

#include <cmath>
#include <span>

#include "aseg/label_map.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

template <typename Scalar>
struct BatchNormParams {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  Scalar epsilon = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);  // weight of the new batch statistic
  bool frozen = false;

  static BatchNormParams identity(Index channels) {
    BatchNormParams p;
    p.gamma = Vector::Ones(channels);
    p.beta = Vector::Zero(channels);
    p.running_mean = Vector::Zero(channels);
    p.running_var = Vector::Ones(channels);
    return p;
  }

  Index channels() const { return gamma.size(); }
};

template <typename Scalar>
struct BatchNormCache {
  Tensor4<Scalar> x_hat;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
  bool batch_stats = false;
};

/// Normalizes per channel over (n, h, w). In training mode (and not frozen)
/// batch statistics are used and blended into the running statistics.
template <typename Scalar>
Tensor4<Scalar> batch_norm(const Tensor4<Scalar>& x, BatchNormParams<Scalar>& p, bool training,
                           BatchNormCache<Scalar>* cache = nullptr) {
  if (p.channels() != x.c()) {
    throw ShapeError("batch_norm: " + std::to_string(p.channels()) + " channels of parameters for " +
                     x.shape().str());
  }
  const bool batch_stats = training && !p.frozen;
  const Index per = x.n() * x.h() * x.w();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean(x.c()), var(x.c());
  if (batch_stats) {
    for (Index c = 0; c < x.c(); ++c) {
      Scalar sum = 0;
      for (Index n = 0; n < x.n(); ++n) sum += x.sample(n).row(c).sum();
      const Scalar m = sum / Scalar(per);
      Scalar sq = 0;
      for (Index n = 0; n < x.n(); ++n) sq += (x.sample(n).row(c).array() - m).square().sum();
      mean[c] = m;
      var[c] = sq / Scalar(per);
    }
    p.running_mean = (Scalar(1) - p.momentum) * p.running_mean + p.momentum * mean;
    p.running_var = (Scalar(1) - p.momentum) * p.running_var + p.momentum * var;
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  const auto inv_std = (var.array() + p.epsilon).rsqrt().matrix().eval();
  Tensor4<Scalar> x_hat(x.shape());
  Tensor4<Scalar> y(x.shape());
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      x_hat.sample(n).row(c) = (x.sample(n).row(c).array() - mean[c]) * inv_std[c];
      y.sample(n).row(c) = x_hat.sample(n).row(c).array() * p.gamma[c] + p.beta[c];
    }
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
    cache->batch_stats = batch_stats;
  }
  return y;
}

template <typename Scalar>
struct BatchNormGrads {
  Tensor4<Scalar> dx;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dgamma;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dbeta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batch_norm_backward(const Tensor4<Scalar>& dy,
                                           const BatchNormParams<Scalar>& p,
                                           const BatchNormCache<Scalar>& cache) {
  require_same_shape(dy.shape(), cache.x_hat.shape(), "batch_norm_backward");
  const Index channels = dy.c();
  const Scalar per = Scalar(dy.n() * dy.h() * dy.w());
  BatchNormGrads<Scalar> g;
  g.dgamma.setZero(channels);
  g.dbeta.setZero(channels);
  for (Index n = 0; n < dy.n(); ++n) {
    g.dbeta += dy.sample(n).rowwise().sum();
    g.dgamma += dy.sample(n).cwiseProduct(cache.x_hat.sample(n)).rowwise().sum();
  }
  g.dx = Tensor4<Scalar>(dy.shape());
  for (Index n = 0; n < dy.n(); ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Scalar k = p.gamma[c] * cache.inv_std[c];
      if (cache.batch_stats) {
        g.dx.sample(n).row(c) =
            (k / per) * (per * dy.sample(n).row(c).array() - g.dbeta[c] -
                         cache.x_hat.sample(n).row(c).array() * g.dgamma[c]);
      } else {
        g.dx.sample(n).row(c) = k * dy.sample(n).row(c);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

/// Per-channel bias, broadcast over pixels. b has shape (1, C, 1, 1).
template <typename Scalar>
Tensor4<Scalar> add_channel_bias(const Tensor4<Scalar>& x, const Tensor4<Scalar>& b) {
  if (b.size() != x.c()) throw ShapeError("add_channel_bias: bias size mismatch");
  Tensor4<Scalar> y(x.shape());
  for (Index n = 0; n < x.n(); ++n) {
    y.sample(n) = x.sample(n);
    y.sample(n).colwise() += b.vec();
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> channel_bias_backward(const Tensor4<Scalar>& dy) {
  Tensor4<Scalar> db(Shape{1, dy.c(), 1, 1});
  for (Index n = 0; n < dy.n(); ++n) db.vec() += dy.sample(n).rowwise().sum();
  return db;
}

template <typename Scalar>
Tensor4<Scalar> global_avg_pool(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> y(Shape{x.n(), x.c(), 1, 1});
  for (Index n = 0; n < x.n(); ++n) y.sample(n).col(0) = x.sample(n).rowwise().mean();
  return y;
}

template <typename Scalar>
Tensor4<Scalar> global_avg_pool_backward(const Tensor4<Scalar>& dy, const Shape& input) {
  Tensor4<Scalar> dx(input);
  const Scalar inv = Scalar(1) / Scalar(input.h * input.w);
  for (Index n = 0; n < input.n; ++n) {
    for (Index c = 0; c < input.c; ++c) dx.sample(n).row(c).setConstant(dy(n, c, 0, 0) * inv);
  }
  return dx;
}

/// Channel softmax at every pixel.
template <typename Scalar>
Tensor4<Scalar> softmax_channels(const Tensor4<Scalar>& logits) {
  Tensor4<Scalar> p(logits.shape());
  for (Index n = 0; n < logits.n(); ++n) {
    auto src = logits.sample(n);
    auto dst = p.sample(n);
    const auto mx = src.colwise().maxCoeff().eval();
    dst = (src.rowwise() - mx).array().exp();
    const auto denom = dst.colwise().sum().eval();
    dst.array().rowwise() /= denom.array();
  }
  return p;
}

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Tensor4<Scalar> dlogits;
  Index counted = 0;  // non-void pixels
};

/// Mean per-pixel cross entropy over non-void pixels of the whole batch,
/// with its gradient. Void pixels contribute neither loss nor gradient.
template <typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Tensor4<Scalar>& logits,
                                         std::span<const LabelMap> labels,
                                         ClassId void_index = kVoid) {
  if (static_cast<Index>(labels.size()) != logits.n()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " label maps for batch " + std::to_string(logits.n()));
  }
  const Index classes = logits.c();
  LossResult<Scalar> r;
  r.dlogits = softmax_channels(logits);
  Scalar total = 0;
  for (Index n = 0; n < logits.n(); ++n) {
    const LabelMap& lab = labels[static_cast<std::size_t>(n)];
    if (lab.h != logits.h() || lab.w != logits.w()) {
      throw ShapeError("softmax_cross_entropy: label map does not match logits spatially");
    }
    auto lg = logits.sample(n);
    auto pr = r.dlogits.sample(n);
    for (Index px = 0; px < lab.size(); ++px) {
      const ClassId t = lab.data[static_cast<std::size_t>(px)];
      if (t == void_index) {
        pr.col(px).setZero();
        continue;
      }
      if (t >= classes) throw DataError("label " + std::to_string(t) + " >= class count");
      const Scalar mx = lg.col(px).maxCoeff();
      const Scalar lse = mx + std::log((lg.col(px).array() - mx).exp().sum());
      total += lse - lg(t, px);
      pr(t, px) -= Scalar(1);
      ++r.counted;
    }
  }
  if (r.counted == 0) {
    r.dlogits.set_zero();
    return r;
  }
  r.loss = total / Scalar(r.counted);
  r.dlogits.vec() /= Scalar(r.counted);
  return r;
}

}  // namespace aseg

#endif  // ASEG_NN_HPP
