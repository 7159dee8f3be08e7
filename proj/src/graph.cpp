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

#include "aseg/graph.hpp"

namespace aseg {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise_conv: return "depthwise_conv";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    case LayerKind::resize_like: return "resize";
    case LayerKind::global_pool: return "global_pool";
    case LayerKind::bias: return "bias";
  }
  return "?";
}

std::vector<Shape> infer_shapes(const LayerGraph& graph, const Shape& input) {
  std::vector<Shape> shapes;
  shapes.reserve(graph.nodes.size());
  for (const LayerNode& n : graph.nodes) {
    auto in = [&](std::size_t i) { return shapes.at(static_cast<std::size_t>(n.inputs.at(i))); };
    switch (n.kind) {
      case LayerKind::input:
        shapes.push_back(input);
        break;
      case LayerKind::conv:
        shapes.push_back(conv_output_shape(in(0), n.out_channels, n.kernel, n.kernel, n.geometry));
        break;
      case LayerKind::depthwise_conv:
        shapes.push_back(conv_output_shape(in(0), in(0).c, n.kernel, n.kernel, n.geometry));
        break;
      case LayerKind::batch_norm:
      case LayerKind::relu:
      case LayerKind::bias:
        shapes.push_back(in(0));
        break;
      case LayerKind::add:
        require_same_shape(in(0), in(1), n.name.c_str());
        shapes.push_back(in(0));
        break;
      case LayerKind::concat: {
        Shape s = in(0);
        s.c = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const Shape p = in(i);
          if (p.n != s.n || p.h != s.h || p.w != s.w) {
            throw ShapeError(n.name + ": concat parts differ spatially (" + p.str() + " vs " +
                             in(0).str() + ")");
          }
          s.c += p.c;
        }
        shapes.push_back(s);
        break;
      }
      case LayerKind::resize_like: {
        Shape s = in(0);
        s.h = in(1).h;
        s.w = in(1).w;
        shapes.push_back(s);
        break;
      }
      case LayerKind::global_pool: {
        Shape s = in(0);
        s.h = 1;
        s.w = 1;
        shapes.push_back(s);
        break;
      }
    }
  }
  return shapes;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const LayerGraph& graph,
                                                            Index input_channels) {
  const auto shapes = infer_shapes(graph, Shape{1, input_channels, 64, 64});
  std::vector<std::pair<std::string, Shape>> out;
  for (const LayerNode& n : graph.nodes) {
    const Index cin = n.inputs.empty() ? 0 : shapes[static_cast<std::size_t>(n.inputs[0])].c;
    switch (n.kind) {
      case LayerKind::conv:
        out.emplace_back(n.name + "/weights", Shape{n.out_channels, cin, n.kernel, n.kernel});
        break;
      case LayerKind::depthwise_conv:
        out.emplace_back(n.name + "/depthwise_weights", Shape{cin, 1, n.kernel, n.kernel});
        break;
      case LayerKind::batch_norm:
        for (const char* p : {"gamma", "beta", "moving_mean", "moving_variance"}) {
          out.emplace_back(n.name + "/" + p, Shape{1, cin, 1, 1});
        }
        break;
      case LayerKind::bias:
        out.emplace_back(n.name + "/biases", Shape{1, cin, 1, 1});
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace aseg
