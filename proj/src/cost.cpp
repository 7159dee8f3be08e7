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

#include "aseg/cost.hpp"

#include <sstream>

#include "aseg/model.hpp"

namespace aseg {

std::int64_t CostReport::section_total(const std::string& section) const {
  std::int64_t t = 0;
  for (const auto& r : records) {
    if (r.section == section) t += r.multiply_adds;
  }
  return t;
}

std::string CostReport::to_csv() const {
  std::ostringstream os;
  os << "# multiply-adds convention: " << kCostConvention << "\n";
  os << "layer,section,kind,kernel,stride,rate,out_n,out_c,out_h,out_w,multiply_adds\n";
  for (const auto& r : records) {
    os << r.name << ',' << r.section << ',' << r.kind << ',' << r.kernel << ',' << r.stride << ','
       << r.rate << ',' << r.output.n << ',' << r.output.c << ',' << r.output.h << ','
       << r.output.w << ',' << r.multiply_adds << '\n';
  }
  os << "total,,,,,,,,,," << total << '\n';
  return os.str();
}

CostReport count_multiply_adds(const LayerGraph& graph, const Shape& input) {
  const auto shapes = infer_shapes(graph, input);
  CostReport report;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const LayerNode& n = graph.nodes[i];
    if (n.kind != LayerKind::conv && n.kind != LayerKind::depthwise_conv) continue;
    const Shape& out = shapes[i];
    const Shape& in = shapes[static_cast<std::size_t>(n.inputs.at(0))];
    std::int64_t madds = out.n * out.h * out.w * n.kernel * n.kernel * in.c;
    if (n.kind == LayerKind::conv) madds *= out.c;
    CostRecord r;
    r.name = n.name;
    r.section = n.section;
    r.kind = n.kind == LayerKind::conv ? (n.kernel == 1 ? "pointwise" : "conv") : "depthwise";
    r.kernel = n.kernel;
    r.stride = n.geometry.stride;
    r.rate = n.geometry.rate;
    r.output = out;
    r.multiply_adds = madds;
    report.total += madds;
    report.records.push_back(std::move(r));
  }
  return report;
}

CostReport count_multiply_adds(const PlannedArch& plan, const Shape& input) {
  return count_multiply_adds(build_model_graph(plan), input);
}

std::int64_t multiscale_multiply_adds(const PlannedArch& plan, const Shape& input,
                                      const std::vector<double>& scales, bool flip) {
  const LayerGraph graph = build_model_graph(plan);
  std::int64_t total = 0;
  for (double s : scales) {
    Shape scaled = input;
    scaled.h = scaled_extent(input.h, s);
    scaled.w = scaled_extent(input.w, s);
    total += count_multiply_adds(graph, scaled).total * (flip ? 2 : 1);
  }
  return total;
}

}  // namespace aseg
