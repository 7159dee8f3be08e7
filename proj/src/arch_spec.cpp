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

#include "aseg/arch_spec.hpp"

#include "aseg/errors.hpp"

namespace aseg {

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::standard_conv: return "standard_conv";
    case BlockKind::separable_conv: return "separable_conv";
    case BlockKind::residual_unit: return "residual_unit";
    case BlockKind::xception_unit: return "xception_unit";
  }
  return "?";
}

void ArchSpec::validate() const {
  if (stem.empty() && body.empty()) throw ConfigError("architecture has no blocks");
  for (const auto* list : {&stem, &body}) {
    for (const BlockSpec& b : *list) {
      if (b.nominal_stride != 1 && b.nominal_stride != 2) {
        throw ConfigError("block '" + b.name + "': nominal stride must be 1 or 2");
      }
      if (b.channels < 1 || b.repeats < 1) {
        throw ConfigError("block '" + b.name + "': channels and repeats must be >= 1");
      }
    }
  }
  switch (target_output_stride) {
    case 4: case 8: case 16: case 32: break;
    default:
      throw ConfigError("target output stride must be one of 4, 8, 16, 32; got " +
                        std::to_string(target_output_stride));
  }
  if (aspp_rates.empty()) throw ConfigError("aspp rates must be non-empty");
  for (int r : aspp_rates) {
    if (r < 1) throw ConfigError("aspp rates must be >= 1");
  }
  if (encoder_channels < 1) throw ConfigError("encoder channels must be >= 1");
  if (decoder_reduce_channels < 1) throw ConfigError("decoder reduce channels must be >= 1");
  if (decoder_enabled && decoder_conv_structure.empty()) {
    throw ConfigError("decoder conv structure must be non-empty");
  }
  for (const DecoderConv& d : decoder_conv_structure) {
    if (d.kernel < 1 || d.kernel % 2 == 0 || d.filters < 1) {
      throw ConfigError("decoder convs need an odd kernel and >= 1 filters");
    }
  }
  if (num_classes < 2 || num_classes > 255) throw ConfigError("num_classes must be in [2, 255]");
  if (input_channels < 1) throw ConfigError("input channels must be >= 1");
  if (!(bn_epsilon > 0)) throw ConfigError("bn epsilon must be > 0");
  if (!(bn_momentum > 0 && bn_momentum < 1)) throw ConfigError("bn momentum must be in (0,1)");
}

ArchSpec make_toy_spec(const ToyBackbone& bb) {
  if (bb.stage_channels.empty()) throw ConfigError("backbone needs at least one stage");
  const bool xc = bb.kind == BackboneKind::xception;
  ArchSpec spec;
  const BlockKind stem_kind = xc ? BlockKind::separable_conv : BlockKind::standard_conv;
  spec.stem.push_back({"stem1", stem_kind, 1, bb.stem_channels, 2, false});
  spec.stem.push_back({"stem2", stem_kind, 1, bb.stem_channels, 2, false});
  const BlockKind unit = xc ? BlockKind::xception_unit : BlockKind::residual_unit;
  if (bb.deep) spec.stem.push_back({"entry_extra", unit, 2, bb.stem_channels, 1, true});
  for (std::size_t i = 0; i < bb.stage_channels.size(); ++i) {
    spec.body.push_back(
        {"stage" + std::to_string(i + 1), unit, bb.units_per_stage, bb.stage_channels[i], 2, true});
  }
  return spec;
}

std::vector<int> aspp_rates_at(const ArchSpec& spec, int output_stride) {
  std::vector<int> rates;
  for (int r : spec.aspp_rates) {
    // r * 16 / OS, rounded up so OS 32 keeps at least rate 1.
    const int scaled = (r * 16 + output_stride - 1) / output_stride;
    rates.push_back(scaled < 1 ? 1 : scaled);
  }
  return rates;
}

PlannedArch plan_output_stride(const ArchSpec& spec) {
  return plan_output_stride(spec, spec.target_output_stride);
}

PlannedArch plan_output_stride(const ArchSpec& spec, int target) {
  if (target < 1) throw PlanError("output stride must be positive");
  PlannedArch plan;
  plan.spec = spec;
  plan.spec.target_output_stride = target;
  int nominal = 1;
  int effective = 1;
  int rate = 1;
  std::vector<const BlockSpec*> all;
  for (const auto& b : spec.stem) all.push_back(&b);
  for (const auto& b : spec.body) all.push_back(&b);
  for (const BlockSpec* b : all) {
    PlannedBlock pb;
    pb.name = b->name;
    pb.nominal_stride = b->nominal_stride;
    pb.input_rate = rate;
    nominal *= b->nominal_stride;
    if (effective * b->nominal_stride > target) {
      pb.effective_stride = 1;
      rate *= b->nominal_stride;
    } else {
      pb.effective_stride = b->nominal_stride;
      effective *= b->nominal_stride;
    }
    pb.rate = rate;
    pb.nominal_cumulative = nominal;
    pb.effective_cumulative = effective;
    plan.blocks.push_back(pb);
  }
  if (effective != target) {
    throw PlanError("output stride " + std::to_string(target) +
                    " is not reachable: nominal stride product is " + std::to_string(nominal));
  }
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    if (plan.blocks[i].nominal_cumulative == 4) plan.conv2_block = static_cast<int>(i);
    if (plan.blocks[i].nominal_cumulative == 8) plan.conv3_block = static_cast<int>(i);
  }
  plan.output_stride = effective;
  return plan;
}

}  // namespace aseg
