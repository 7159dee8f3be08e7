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

#ifndef ASEG_GRAPH_HPP
#define ASEG_GRAPH_HPP

#include <map>
#include <string>
#include <vector>

#include "aseg/conv.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

enum class LayerKind {
  input,
  conv,            // dense convolution, params <name>/weights
  depthwise_conv,  // params <name>/depthwise_weights
  batch_norm,      // params <name>/{gamma,beta,moving_mean,moving_variance}
  relu,
  add,
  concat,
  resize_like,  // bilinear resize of inputs[0] to the spatial size of inputs[1]
  global_pool,
  bias,  // params <name>/biases
};

const char* to_string(LayerKind kind);

struct LayerNode {
  LayerKind kind = LayerKind::input;
  std::string name;
  std::vector<int> inputs;
  Index out_channels = 0;  // conv only
  Index kernel = 1;        // conv and depthwise_conv
  ConvGeometry geometry;
  std::string section;  // backbone, aspp, decoder, head
};

/// Topologically ordered layer DAG. Node 0 is the input.
struct LayerGraph {
  std::vector<LayerNode> nodes;
  std::map<std::string, int> taps;
  int output = -1;

  int add(LayerNode node) {
    for (int in : node.inputs) {
      if (in < 0 || in >= static_cast<int>(nodes.size())) {
        throw ShapeError("layer '" + node.name + "' references an unknown input");
      }
    }
    nodes.push_back(std::move(node));
    return static_cast<int>(nodes.size()) - 1;
  }

  const LayerNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
};

/// Output shape of every node for a given input shape.
std::vector<Shape> infer_shapes(const LayerGraph& graph, const Shape& input);

/// Parameter name -> shape for every parameter the graph reads, in node order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const LayerGraph& graph,
                                                            Index input_channels);

}  // namespace aseg

#endif  // ASEG_GRAPH_HPP
