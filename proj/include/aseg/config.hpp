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

// Run configuration in flat "key = value" form with dotted keys, '#'
// comments and blank lines. Every key must be known; see `config_keys()`.
//
//   model.backbone = xception
//   decoder.reduce_channels = 48
//   decoder.structure = 3x256,3x256
//   eval.ms_scales = 0.5,1,1.5

#ifndef ASEG_CONFIG_HPP
#define ASEG_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aseg/arch_spec.hpp"
#include "aseg/dataset.hpp"
#include "aseg/optim.hpp"

namespace aseg {

struct ModelConfig {
  ToyBackbone backbone;
  int num_classes = 4;
  int output_stride = 16;  // training output stride
  std::vector<int> aspp_rates{6, 12, 18};
  bool aspp_image_level = true;
  int encoder_channels = 256;
  bool decoder_enabled = true;
  int decoder_reduce_channels = 48;
  std::vector<DecoderConv> decoder_structure{{3, 256}, {3, 256}};
  LowLevelTaps decoder_taps = LowLevelTaps::conv2;
  bool separable_heads = false;
  bool pointwise_bn_relu = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  bool bn_frozen = false;
};

struct TrainConfig {
  double base_lr = 0.007;
  double power = 0.9;
  double momentum = 0.9;
  double weight_decay = 4e-5;
  std::int64_t max_iter = 3000;
  int batch = 8;
  int crop = 64;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double hflip_prob = 0.5;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 500;
};

struct EvalConfig {
  int output_stride = 0;  // 0: same as training
  std::vector<double> ms_scales{1.0};
  bool flip = false;
  std::vector<int> trimap_widths{1, 3, 5, 9};
};

/// Empty manifests select the synthetic shapes dataset: the training split is
/// images [0, train_count) of the seeded stream and the held-out split the
/// next eval_count images.
struct DataConfig {
  std::string train_manifest;
  std::string eval_manifest;
  int side = 64;
  int train_count = 200;
  int eval_count = 50;
  std::uint64_t seed = 7;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  DataConfig data;

  ArchSpec arch() const;
  PolySchedule schedule() const;
  AugmentOptions augment() const;
  int eval_output_stride() const { return eval.output_stride > 0 ? eval.output_stride : model.output_stride; }

  /// Throws ConfigError for invalid combinations.
  void validate() const;
};

std::vector<std::string> config_keys();

/// Sets one key from its text form. Unknown key or bad value: ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

RunConfig parse_config(const std::string& text, const RunConfig& defaults = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key in `config_keys()` order; parse(format(c)) reproduces c exactly.
std::string format_config(const RunConfig& cfg);

}  // namespace aseg

#endif  // ASEG_CONFIG_HPP
