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

#ifndef ASEG_METRICS_HPP
#define ASEG_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aseg/label_map.hpp"

namespace aseg {

/// K x K pixel counts; entry (g, p) counts ground truth g predicted as p.
/// Void ground-truth pixels are never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// Adds every non-void pixel, or only pixels where `mask` is set.
  void add(const LabelMap& gt, const LabelMap& pred, const std::vector<bool>* mask = nullptr);
  void merge(const ConfusionMatrix& other);

  std::int64_t at(int g, int p) const { return counts_[static_cast<std::size_t>(g * k_ + p)]; }
  int num_classes() const { return k_; }
  std::int64_t total() const;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

struct IouResult {
  double mean = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt: class absent from gt and pred
};

/// IOU_k = tp / (row_k + col_k - tp); the mean skips undefined classes.
/// Throws MetricError when no class is defined.
IouResult miou(const ConfusionMatrix& cm);

/// Squared Euclidean distance from every pixel to the nearest void pixel
/// (infinity when the map has no void pixel).
std::vector<double> squared_distance_to_void(const LabelMap& gt);

/// Pixels within Euclidean distance `width` of a void pixel.
std::vector<bool> trimap_band(const std::vector<double>& sq_dist, int width);

/// Per-width confusion matrices restricted to the trimap band, non-void gt only.
class TrimapAccumulator {
 public:
  TrimapAccumulator(int num_classes, std::vector<int> widths);
  void add(const LabelMap& gt, const LabelMap& pred);

  const std::vector<int>& widths() const { return widths_; }
  const ConfusionMatrix& matrix(std::size_t i) const { return matrices_[i]; }
  /// mIOU per width; nullopt where the band held no scorable pixel.
  std::vector<std::optional<double>> results() const;

 private:
  std::vector<int> widths_;
  std::vector<ConfusionMatrix> matrices_;
};

/// Single-image trimap mIOU for each width.
std::vector<std::optional<double>> trimap_miou(const LabelMap& gt, const LabelMap& pred,
                                               std::span<const int> widths, int num_classes);

}  // namespace aseg

#endif  // ASEG_METRICS_HPP
