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

#ifndef ASEG_LABEL_MAP_HPP
#define ASEG_LABEL_MAP_HPP

#include <cstdint>
#include <vector>

#include "aseg/errors.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

using ClassId = std::uint8_t;

/// Reserved label excluded from loss and from every metric count.
inline constexpr ClassId kVoid = 255;

/// Per-pixel class indices, row-major.
struct LabelMap {
  Index h = 0;
  Index w = 0;
  std::vector<ClassId> data;

  LabelMap() = default;
  LabelMap(Index height, Index width, ClassId fill = 0)
      : h(height), w(width), data(static_cast<std::size_t>(height * width), fill) {}

  ClassId& operator()(Index y, Index x) { return data[static_cast<std::size_t>(y * w + x)]; }
  ClassId operator()(Index y, Index x) const { return data[static_cast<std::size_t>(y * w + x)]; }
  Index size() const { return h * w; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline void validate_labels(const LabelMap& m, int num_classes) {
  for (ClassId v : m.data) {
    if (v != kVoid && v >= num_classes) {
      throw DataError("label value " + std::to_string(v) + " outside [0," +
                      std::to_string(num_classes) + ") and not void");
    }
  }
}

/// Per-pixel argmax over channels of sample n; ties resolve to the lower class.
template <typename Scalar>
LabelMap argmax_labels(const Tensor4<Scalar>& scores, Index n = 0) {
  LabelMap out(scores.h(), scores.w());
  for (Index p = 0; p < scores.h() * scores.w(); ++p) {
    Index best = 0;
    Scalar best_v = scores.plane(n, 0)[p];
    for (Index c = 1; c < scores.c(); ++c) {
      const Scalar v = scores.plane(n, c)[p];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.data[static_cast<std::size_t>(p)] = static_cast<ClassId>(best);
  }
  return out;
}

}  // namespace aseg

#endif  // ASEG_LABEL_MAP_HPP
