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

// Reverse-mode differentiation over whole-tensor operations.
//
// A Tape records every value produced during a forward pass together with a
// closure that maps the value's gradient onto the gradients of its inputs.
// Tape::backward() seeds one node and replays the closures newest-first.
// Parameter leaves accumulate straight into their ParamStore gradient.

#ifndef ASEG_AUTODIFF_HPP
#define ASEG_AUTODIFF_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aseg/conv.hpp"
#include "aseg/nn.hpp"
#include "aseg/param_store.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& dy)>;

  Var constant(Tensor value, std::string label = "input");

  /// Leaf bound to a store entry. Gradients flow back only if the entry is
  /// trainable and gradient recording is on.
  Var parameter(ParamStore& store, const std::string& name);

  /// Appends a computed node. `requires_grad` should be true when any input does.
  Var record(std::string label, Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  const std::string& label(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).label; }
  bool requires_grad(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad;
  }

  void accumulate(Var v, const Tensor& g);

  void backward(Var root, const Tensor& seed);

  /// Label of the first recorded node holding a NaN or infinity.
  std::optional<std::string> first_non_finite() const;

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string label;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// Differentiable operations. Labels name the node for diagnostics.
namespace ag {

Var conv2d(Tape& t, Var x, Var w, const ConvGeometry& g, const std::string& label);
Var depthwise_conv2d(Tape& t, Var x, Var w, const ConvGeometry& g, const std::string& label);
Var bias(Tape& t, Var x, Var b, const std::string& label);
Var relu(Tape& t, Var x, const std::string& label);
Var add(Tape& t, Var a, Var b, const std::string& label);
Var concat(Tape& t, const std::vector<Var>& parts, const std::string& label);
Var resize(Tape& t, Var x, Index out_h, Index out_w, const std::string& label);
Var global_avg_pool(Tape& t, Var x, const std::string& label);

/// Batch norm whose affine parameters and running statistics live in `store`
/// under `prefix`/{gamma,beta,moving_mean,moving_variance}.
Var batch_norm(Tape& t, Var x, ParamStore& store, const std::string& prefix, bool training,
               double epsilon, double momentum, bool frozen);

}  // namespace ag

}  // namespace aseg

#endif  // ASEG_AUTODIFF_HPP
