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

// Training loop and evaluation over in-memory samples.
//
// Batches are a pure function of (seed, iteration): sample order follows a
// per-epoch permutation and every augmentation draws its own derived seed, so
// a resumed run sees exactly the batches an uninterrupted run would.

#ifndef ASEG_TRAINER_HPP
#define ASEG_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aseg/config.hpp"
#include "aseg/dataset.hpp"
#include "aseg/metrics.hpp"
#include "aseg/model.hpp"
#include "aseg/optim.hpp"

namespace aseg {

/// Loads the manifest named in the config, or generates the shapes split.
std::vector<Sample> load_train_split(const RunConfig& cfg);
std::vector<Sample> load_eval_split(const RunConfig& cfg);

/// File name of the i-th held-out label (manifest name or NNNN.pgm).
std::vector<std::string> eval_label_names(const RunConfig& cfg);

Batch make_batch(const std::vector<Sample>& samples, const AugmentOptions& aug, int batch_size,
                 std::uint64_t seed, std::int64_t iteration);

struct TrainLogRow {
  std::int64_t iter = 0;  // 1-based step number
  double lr = 0.0;
  double loss = 0.0;
};

std::string format_loss_log(const std::vector<TrainLogRow>& rows);

/// Runs steps start_iter .. max_iter - 1. `on_step` sees each row after its
/// update; returning false stops early.
std::vector<TrainLogRow> train_model(Model& model, const std::vector<Sample>& samples,
                                     const RunConfig& cfg, std::int64_t start_iter = 0,
                                     const std::function<bool(const TrainLogRow&)>& on_step = {});

struct EvalOptions {
  int output_stride = 16;
  std::vector<double> scales{1.0};
  bool flip = false;
  std::vector<int> trimap_widths{1, 3, 5, 9};
};

EvalOptions eval_options(const RunConfig& cfg);

struct EvalResult {
  EvalOptions options;
  IouResult iou;
  std::vector<std::optional<double>> trimap;  // per width
  std::int64_t multiply_adds = 0;             // per image of the evaluated size
};

EvalResult evaluate(Model& model, const std::vector<Sample>& samples, const EvalOptions& opt);

/// Scores already computed label maps against the ground truth.
EvalResult evaluate_predictions(const std::vector<LabelMap>& gt, const std::vector<LabelMap>& pred,
                                int num_classes, const std::vector<int>& trimap_widths);

/// "metric,value" rows: miou, iou_class_k, trimap_w, multiply_adds.
std::string format_eval_csv(const EvalResult& r);

}  // namespace aseg

#endif  // ASEG_TRAINER_HPP
