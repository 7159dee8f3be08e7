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

#ifndef ASEG_PARAM_STORE_HPP
#define ASEG_PARAM_STORE_HPP

#include <map>
#include <string>

#include "aseg/tensor.hpp"

namespace aseg {

struct ParamEntry {
  Tensor value;
  Tensor grad;  // same shape as value
  bool trainable = true;
};

/// Named parameters with paired gradient storage. Iteration is in name order.
/// Non-trainable entries (batch-norm running statistics) are persisted but
/// never touched by the optimizer.
class ParamStore {
 public:
  using Map = std::map<std::string, ParamEntry>;

  ParamEntry& add(const std::string& name, Tensor value, bool trainable = true) {
    if (entries_.contains(name)) throw ShapeError("duplicate parameter '" + name + "'");
    ParamEntry e;
    e.grad = Tensor(value.shape());
    e.value = std::move(value);
    e.trainable = trainable;
    return entries_.emplace(name, std::move(e)).first->second;
  }

  bool contains(const std::string& name) const { return entries_.contains(name); }

  ParamEntry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
  }
  const ParamEntry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
  }

  void zero_grad() {
    for (auto& [_, e] : entries_) e.grad.set_zero();
  }

  Index scalar_count(bool trainable_only = false) const {
    Index total = 0;
    for (const auto& [_, e] : entries_) {
      if (!trainable_only || e.trainable) total += e.value.size();
    }
    return total;
  }

  std::size_t size() const { return entries_.size(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

 private:
  Map entries_;
};

}  // namespace aseg

#endif  // ASEG_PARAM_STORE_HPP
