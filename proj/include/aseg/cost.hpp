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

// Multiply-add accounting for one forward pass.
//
//   dense conv:     H_out * W_out * kh * kw * C_in * C_out
//   depthwise conv: H_out * W_out * kh * kw * C
//   1x1 conv:       H_out * W_out * C_in * C_out
//
// times the batch size. The atrous rate does not change the count; bias,
// batch norm, activations, pooling and resizes count as zero.

#ifndef ASEG_COST_HPP
#define ASEG_COST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "aseg/arch_spec.hpp"
#include "aseg/graph.hpp"

namespace aseg {

inline constexpr const char* kCostConvention =
    "one multiply-add per multiply; rate-independent; bias/bn/activation/pool/resize = 0";

struct CostRecord {
  std::string name;
  std::string section;
  std::string kind;
  Index kernel = 1;
  Index stride = 1;
  Index rate = 1;
  Shape output;
  std::int64_t multiply_adds = 0;
};

struct CostReport {
  std::vector<CostRecord> records;
  std::int64_t total = 0;

  std::int64_t section_total(const std::string& section) const;
  std::string to_csv() const;
};

CostReport count_multiply_adds(const LayerGraph& graph, const Shape& input);
CostReport count_multiply_adds(const PlannedArch& plan, const Shape& input);

/// Sum over scales (and mirrored copies) of single-pass costs.
std::int64_t multiscale_multiply_adds(const PlannedArch& plan, const Shape& input,
                                      const std::vector<double>& scales, bool flip);

}  // namespace aseg

#endif  // ASEG_COST_HPP
