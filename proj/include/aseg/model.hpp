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

// Encoder-decoder segmentation network assembled from a planned ArchSpec.
//
// Parameter names depend only on the ArchSpec, never on the output-stride
// plan, so one set of weights can be evaluated at any reachable output stride.

#ifndef ASEG_MODEL_HPP
#define ASEG_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aseg/arch_spec.hpp"
#include "aseg/autodiff.hpp"
#include "aseg/graph.hpp"
#include "aseg/param_store.hpp"

namespace aseg {

/// Appends layers to a LayerGraph with the naming scheme used for parameters.
class GraphBuilder {
 public:
  explicit GraphBuilder(LayerGraph& graph) : graph_(graph) {}

  int input();
  int conv(const std::string& name, int in, Index out_channels, Index kernel,
           const ConvGeometry& g = {});
  int depthwise(const std::string& name, int in, Index kernel, const ConvGeometry& g = {});
  int batch_norm(const std::string& name, int in);
  int relu(const std::string& name, int in);
  int bias(const std::string& name, int in);
  int add(const std::string& name, int a, int b);
  int concat(const std::string& name, std::vector<int> parts);
  int resize_like(const std::string& name, int in, int reference);
  int global_pool(const std::string& name, int in);

  /// conv -> BN -> optional ReLU.
  int conv_bn(const std::string& name, int in, Index out_channels, Index kernel,
              const ConvGeometry& g, bool with_relu = true);
  /// depthwise -> BN -> ReLU -> pointwise -> BN -> optional ReLU.
  /// With `pointwise_bn` false the pointwise stage has no BN/ReLU of its own.
  int separable_bn(const std::string& name, int in, Index out_channels, Index kernel,
                   const ConvGeometry& g, bool with_relu = true, bool pointwise_bn = true);

  void set_section(std::string section) { section_ = std::move(section); }
  void tap(const std::string& name, int id) { graph_.taps[name] = id; }
  LayerGraph& graph() { return graph_; }

 private:
  int push(LayerNode node);

  LayerGraph& graph_;
  std::string section_ = "backbone";
};

/// Backbone layers honoring the planned strides and rates. Registers taps
/// "conv2" / "conv3" (stage outputs at nominal OS 4 / 8) when present.
int build_backbone(GraphBuilder& b, const PlannedArch& plan, int input);

/// ASPP: 1x1 branch, one 3x3 atrous branch per rate, optional image-level
/// branch, concatenated and projected to `channels` with a 1x1 conv.
int build_aspp(GraphBuilder& b, int in, const std::vector<int>& rates, bool image_level,
               bool separable, Index channels);

/// Decoder head from the encoder output to logits at input resolution. With
/// the decoder disabled the logits are bilinearly upsampled straight from the
/// encoder output stride.
int build_decoder(GraphBuilder& b, const PlannedArch& plan, int encoder, int input);

LayerGraph build_model_graph(const PlannedArch& plan);

/// Glorot-uniform convolution weights, zero biases, identity batch norm.
ParamStore init_params(const ArchSpec& spec, std::uint64_t seed);

enum class Mode { train, eval };

struct Model {
  ArchSpec spec;
  ParamStore params;
};

/// Records the whole network on `tape` and returns the logits node.
Var forward(Tape& tape, const LayerGraph& graph, ParamStore& params, const ArchSpec& spec,
            const Tensor& x, Mode mode);

/// Logits at input resolution. `output_stride` 0 uses the spec's target.
Tensor forward(Model& model, const Tensor& x, Mode mode, int output_stride = 0);

/// Softmax probabilities averaged over input scales and, optionally, mirrored
/// copies, all resampled to the input resolution.
Tensor predict_multiscale(Model& model, const Tensor& x, std::span<const double> scales, bool flip,
                          int output_stride = 0);

/// Scaled spatial size used for a multi-scale pass.
Index scaled_extent(Index extent, double scale);

}  // namespace aseg

#endif  // ASEG_MODEL_HPP
