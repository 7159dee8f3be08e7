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

#include "aseg/metrics.hpp"

#include <limits>
#include <numeric>

namespace aseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(num_classes * num_classes), 0) {
  if (num_classes < 1) throw MetricError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(const LabelMap& gt, const LabelMap& pred, const std::vector<bool>* mask) {
  if (gt.h != pred.h || gt.w != pred.w) throw ShapeError("confusion matrix: map sizes differ");
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const ClassId g = gt.data[i];
    if (g == kVoid || (mask != nullptr && !(*mask)[i])) continue;
    const ClassId p = pred.data[i];
    if (g >= k_) throw DataError("ground-truth label " + std::to_string(g) + " >= class count");
    if (p >= k_) throw DataError("predicted label " + std::to_string(p) + " >= class count");
    ++counts_[static_cast<std::size_t>(g * k_ + p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw MetricError("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

IouResult miou(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  IouResult r;
  r.per_class.resize(static_cast<std::size_t>(k));
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t denom = row + col - tp;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++defined;
  }
  if (defined == 0) throw MetricError("mIOU undefined: no class present in ground truth or prediction");
  r.mean = sum / defined;
  return r;
}

namespace {

// Exact 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, Index n, std::vector<Index>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n + 1), 0.0);
  Index k = -1;
  for (Index q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const Index p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + static_cast<double>(q * q)) - (f[p] + static_cast<double>(p * p))) /
          (2.0 * static_cast<double>(q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k + 1)] = kInf;
  }
  if (k < 0) {
    for (Index q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  Index j = 0;
  for (Index q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j + 1)] < static_cast<double>(q)) ++j;
    const Index p = v[static_cast<std::size_t>(j)];
    d[q] = static_cast<double>((q - p) * (q - p)) + f[p];
  }
}

}  // namespace

std::vector<double> squared_distance_to_void(const LabelMap& gt) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Index h = gt.h, w = gt.w;
  std::vector<double> grid(static_cast<std::size_t>(h * w));
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = gt.data[i] == kVoid ? 0.0 : kInf;
  std::vector<Index> v;
  std::vector<double> z;
  std::vector<double> in(static_cast<std::size_t>(std::max(h, w)));
  std::vector<double> out(in.size());
  for (Index x = 0; x < w; ++x) {
    for (Index y = 0; y < h; ++y) in[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y * w + x)];
    edt_1d(in.data(), out.data(), h, v, z);
    for (Index y = 0; y < h; ++y) grid[static_cast<std::size_t>(y * w + x)] = out[static_cast<std::size_t>(y)];
  }
  for (Index y = 0; y < h; ++y) {
    edt_1d(grid.data() + y * w, out.data(), w, v, z);
    std::copy_n(out.data(), w, grid.data() + y * w);
  }
  return grid;
}

std::vector<bool> trimap_band(const std::vector<double>& sq_dist, int width) {
  const double limit = static_cast<double>(width) * static_cast<double>(width);
  std::vector<bool> band(sq_dist.size());
  for (std::size_t i = 0; i < sq_dist.size(); ++i) band[i] = sq_dist[i] <= limit;
  return band;
}

TrimapAccumulator::TrimapAccumulator(int num_classes, std::vector<int> widths)
    : widths_(std::move(widths)) {
  for (int w : widths_) {
    if (w < 0) throw MetricError("trimap width must be >= 0");
    matrices_.emplace_back(num_classes);
  }
}

void TrimapAccumulator::add(const LabelMap& gt, const LabelMap& pred) {
  const auto dist = squared_distance_to_void(gt);
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const auto band = trimap_band(dist, widths_[i]);
    matrices_[i].add(gt, pred, &band);
  }
}

std::vector<std::optional<double>> TrimapAccumulator::results() const {
  std::vector<std::optional<double>> out;
  for (const auto& m : matrices_) {
    if (m.total() == 0) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(miou(m).mean);
    }
  }
  return out;
}

std::vector<std::optional<double>> trimap_miou(const LabelMap& gt, const LabelMap& pred,
                                               std::span<const int> widths, int num_classes) {
  TrimapAccumulator acc(num_classes, std::vector<int>(widths.begin(), widths.end()));
  acc.add(gt, pred);
  return acc.results();
}

}  // namespace aseg
