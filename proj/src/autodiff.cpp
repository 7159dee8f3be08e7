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

#include "aseg/autodiff.hpp"

#include <memory>

namespace aseg {

Var Tape::constant(Tensor value, std::string label) {
  return record(std::move(label), std::move(value), false, nullptr);
}

Var Tape::parameter(ParamStore& store, const std::string& name) {
  ParamEntry* entry = &store.at(name);
  const bool grad = grad_enabled_ && entry->trainable;
  BackwardFn fn;
  if (grad) {
    fn = [entry](Tape&, const Tensor& dy) { entry->grad.vec() += dy.vec(); };
  }
  return record(name, entry->value, grad, std::move(fn));
}

Var Tape::record(std::string label, Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.label = std::move(label);
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& node = nodes_.at(static_cast<std::size_t>(v.id));
  if (!node.requires_grad) return;
  require_same_shape(node.value.shape(), g.shape(), ("gradient of " + node.label).c_str());
  if (node.grad.empty()) {
    node.grad = g;
  } else {
    node.grad.vec() += g.vec();
  }
}

void Tape::backward(Var root, const Tensor& seed) {
  accumulate(root, seed);
  for (int i = root.id; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.grad.empty() || !node.backward) continue;
    Tensor dy = std::move(node.grad);
    node.grad = Tensor();
    node.backward(*this, dy);
  }
}

std::optional<std::string> Tape::first_non_finite() const {
  for (const Node& n : nodes_) {
    if (!all_finite(n.value)) return n.label;
  }
  return std::nullopt;
}

namespace ag {

Var conv2d(Tape& t, Var x, Var w, const ConvGeometry& g, const std::string& label) {
  Tensor y = aseg::conv2d(t.value(x), t.value(w), g);
  const bool rg = t.requires_grad(x) || t.requires_grad(w);
  return t.record(label, std::move(y), rg, [x, w, g](Tape& tp, const Tensor& dy) {
    auto grads = conv2d_backward(tp.value(x), tp.value(w), g, dy, tp.requires_grad(x));
    if (tp.requires_grad(x)) tp.accumulate(x, grads.dx);
    tp.accumulate(w, grads.dw);
  });
}

Var depthwise_conv2d(Tape& t, Var x, Var w, const ConvGeometry& g, const std::string& label) {
  Tensor y = aseg::depthwise_conv2d(t.value(x), t.value(w), g);
  const bool rg = t.requires_grad(x) || t.requires_grad(w);
  return t.record(label, std::move(y), rg, [x, w, g](Tape& tp, const Tensor& dy) {
    auto grads = depthwise_conv2d_backward(tp.value(x), tp.value(w), g, dy, tp.requires_grad(x));
    if (tp.requires_grad(x)) tp.accumulate(x, grads.dx);
    tp.accumulate(w, grads.dw);
  });
}

Var bias(Tape& t, Var x, Var b, const std::string& label) {
  Tensor y = add_channel_bias(t.value(x), t.value(b));
  const bool rg = t.requires_grad(x) || t.requires_grad(b);
  return t.record(label, std::move(y), rg, [x, b](Tape& tp, const Tensor& dy) {
    tp.accumulate(x, dy);
    tp.accumulate(b, channel_bias_backward(dy));
  });
}

Var relu(Tape& t, Var x, const std::string& label) {
  return t.record(label, aseg::relu(t.value(x)), t.requires_grad(x),
                  [x](Tape& tp, const Tensor& dy) { tp.accumulate(x, relu_backward(tp.value(x), dy)); });
}

Var add(Tape& t, Var a, Var b, const std::string& label) {
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.record(label, aseg::add(t.value(a), t.value(b)), rg, [a, b](Tape& tp, const Tensor& dy) {
    tp.accumulate(a, dy);
    tp.accumulate(b, dy);
  });
}

Var concat(Tape& t, const std::vector<Var>& parts, const std::string& label) {
  std::vector<const Tensor*> values;
  bool rg = false;
  for (Var p : parts) {
    values.push_back(&t.value(p));
    rg = rg || t.requires_grad(p);
  }
  Tensor y = concat_channels<double>(std::span<const Tensor* const>(values));
  return t.record(label, std::move(y), rg, [parts](Tape& tp, const Tensor& dy) {
    Index c0 = 0;
    for (Var p : parts) {
      const Index c = tp.value(p).c();
      if (tp.requires_grad(p)) tp.accumulate(p, slice_channels(dy, c0, c));
      c0 += c;
    }
  });
}

Var resize(Tape& t, Var x, Index out_h, Index out_w, const std::string& label) {
  const Index in_h = t.value(x).h();
  const Index in_w = t.value(x).w();
  return t.record(label, bilinear_resize(t.value(x), out_h, out_w), t.requires_grad(x),
                  [x, in_h, in_w](Tape& tp, const Tensor& dy) {
                    tp.accumulate(x, bilinear_resize_backward(dy, in_h, in_w));
                  });
}

Var global_avg_pool(Tape& t, Var x, const std::string& label) {
  const Shape in = t.value(x).shape();
  return t.record(label, aseg::global_avg_pool(t.value(x)), t.requires_grad(x),
                  [x, in](Tape& tp, const Tensor& dy) {
                    tp.accumulate(x, global_avg_pool_backward(dy, in));
                  });
}

Var batch_norm(Tape& t, Var x, ParamStore& store, const std::string& prefix, bool training,
               double epsilon, double momentum, bool frozen) {
  Var gamma = t.parameter(store, prefix + "/gamma");
  Var beta = t.parameter(store, prefix + "/beta");
  ParamEntry& mean = store.at(prefix + "/moving_mean");
  ParamEntry& var = store.at(prefix + "/moving_variance");

  auto params = std::make_shared<BatchNormParams<double>>();
  params->gamma = t.value(gamma).vec();
  params->beta = t.value(beta).vec();
  params->running_mean = mean.value.vec();
  params->running_var = var.value.vec();
  params->epsilon = epsilon;
  params->momentum = momentum;
  params->frozen = frozen;

  auto cache = std::make_shared<BatchNormCache<double>>();
  Tensor y = aseg::batch_norm(t.value(x), *params, training, cache.get());
  if (cache->batch_stats) {
    mean.value.vec() = params->running_mean;
    var.value.vec() = params->running_var;
  }
  const bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  return t.record(prefix, std::move(y), rg, [x, gamma, beta, params, cache](Tape& tp, const Tensor& dy) {
    auto g = batch_norm_backward(dy, *params, *cache);
    tp.accumulate(x, g.dx);
    const Shape ps{1, dy.c(), 1, 1};
    tp.accumulate(gamma, Tensor(ps, g.dgamma));
    tp.accumulate(beta, Tensor(ps, g.dbeta));
  });
}

}  // namespace ag

}  // namespace aseg
