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

#include "aseg/optim.hpp"

#include <cmath>

#include "aseg/autodiff.hpp"
#include "aseg/nn.hpp"

namespace aseg {

void PolySchedule::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("poly schedule: base_lr must be > 0");
  if (!(power > 0.0)) throw ConfigError("poly schedule: power must be > 0");
  if (max_iter < 1) throw ConfigError("poly schedule: max_iter must be >= 1");
}

double lr_at(const PolySchedule& s, std::int64_t iter) {
  if (iter >= s.max_iter) return 0.0;
  if (iter <= 0) return s.base_lr;
  const double frac = static_cast<double>(iter) / static_cast<double>(s.max_iter);
  return s.base_lr * std::pow(1.0 - frac, s.power);
}

void sgd_step(ParamStore& params, SgdState& state, double lr) {
  for (auto& [name, e] : params) {
    if (!e.trainable) continue;
    if (e.grad.shape() != e.value.shape()) {
      throw ShapeError("sgd_step: parameter '" + name + "' has no gradient");
    }
    auto it = state.velocity.find(name);
    if (it == state.velocity.end()) it = state.velocity.emplace(name, Tensor(e.value.shape())).first;
    Tensor& v = it->second;
    v.vec() = state.momentum * v.vec() + e.grad.vec() + state.weight_decay * e.value.vec();
    e.value.vec() -= lr * v.vec();
  }
  params.zero_grad();
}

double train_step(Model& model, const LayerGraph& graph, const Batch& batch, SgdState& state,
                  double lr) {
  Tape tape;
  const Var logits = forward(tape, graph, model.params, model.spec, batch.images, Mode::train);
  const auto loss = softmax_cross_entropy(tape.value(logits), std::span<const LabelMap>(batch.labels));
  if (!std::isfinite(loss.loss)) {
    const auto bad = tape.first_non_finite();
    throw NumericError("non-finite loss" + (bad ? " (first non-finite tensor: " + *bad + ")"
                                                : std::string(" (all activations finite)")));
  }
  tape.backward(logits, loss.dlogits);
  for (const auto& [name, e] : model.params) {
    if (e.trainable && !all_finite(e.grad)) {
      throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }
  sgd_step(model.params, state, lr);
  return loss.loss;
}

}  // namespace aseg
