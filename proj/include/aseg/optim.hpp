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

#ifndef ASEG_OPTIM_HPP
#define ASEG_OPTIM_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "aseg/graph.hpp"
#include "aseg/label_map.hpp"
#include "aseg/model.hpp"
#include "aseg/param_store.hpp"

namespace aseg {

/// base_lr * (1 - iter / max_iter)^power, and 0 past max_iter.
struct PolySchedule {
  double base_lr = 0.007;
  double power = 0.9;
  std::int64_t max_iter = 1;

  void validate() const;
};

double lr_at(const PolySchedule& s, std::int64_t iter);

struct SgdState {
  double momentum = 0.9;
  double weight_decay = 4e-5;
  std::map<std::string, Tensor> velocity;
};

/// v <- m v + g + wd w;  w <- w - lr v;  then zeroes every gradient.
/// Non-trainable entries are left untouched.
void sgd_step(ParamStore& params, SgdState& state, double lr);

struct Batch {
  Tensor images;                 // (N, C, H, W)
  std::vector<LabelMap> labels;  // N maps of H x W
};

/// One forward in train mode, backward through the cross-entropy loss and one
/// SGD step. Throws NumericError naming the first non-finite tensor.
double train_step(Model& model, const LayerGraph& graph, const Batch& batch, SgdState& state,
                  double lr);

}  // namespace aseg

#endif  // ASEG_OPTIM_HPP
