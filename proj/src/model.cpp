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

#include "aseg/model.hpp"

#include <cmath>
#include <random>

namespace aseg {

// ---------------------------------------------------------------------------
// GraphBuilder

int GraphBuilder::push(LayerNode node) {
  node.section = section_;
  return graph_.add(std::move(node));
}

int GraphBuilder::input() {
  LayerNode n;
  n.kind = LayerKind::input;
  n.name = "input";
  return push(std::move(n));
}

int GraphBuilder::conv(const std::string& name, int in, Index out_channels, Index kernel,
                       const ConvGeometry& g) {
  LayerNode n;
  n.kind = LayerKind::conv;
  n.name = name;
  n.inputs = {in};
  n.out_channels = out_channels;
  n.kernel = kernel;
  n.geometry = g;
  return push(std::move(n));
}

int GraphBuilder::depthwise(const std::string& name, int in, Index kernel, const ConvGeometry& g) {
  LayerNode n;
  n.kind = LayerKind::depthwise_conv;
  n.name = name;
  n.inputs = {in};
  n.kernel = kernel;
  n.geometry = g;
  return push(std::move(n));
}

namespace {

LayerNode plain_node(LayerKind kind, const std::string& name, std::vector<int> inputs) {
  LayerNode n;
  n.kind = kind;
  n.name = name;
  n.inputs = std::move(inputs);
  return n;
}

}  // namespace

int GraphBuilder::batch_norm(const std::string& name, int in) {
  return push(plain_node(LayerKind::batch_norm, name, {in}));
}

int GraphBuilder::relu(const std::string& name, int in) { return push(plain_node(LayerKind::relu, name, {in})); }

int GraphBuilder::bias(const std::string& name, int in) { return push(plain_node(LayerKind::bias, name, {in})); }

int GraphBuilder::add(const std::string& name, int a, int b) {
  return push(plain_node(LayerKind::add, name, {a, b}));
}

int GraphBuilder::concat(const std::string& name, std::vector<int> parts) {
  return push(plain_node(LayerKind::concat, name, std::move(parts)));
}

int GraphBuilder::resize_like(const std::string& name, int in, int reference) {
  return push(plain_node(LayerKind::resize_like, name, {in, reference}));
}

int GraphBuilder::global_pool(const std::string& name, int in) {
  return push(plain_node(LayerKind::global_pool, name, {in}));
}

int GraphBuilder::conv_bn(const std::string& name, int in, Index out_channels, Index kernel,
                          const ConvGeometry& g, bool with_relu) {
  int x = conv(name, in, out_channels, kernel, g);
  x = batch_norm(name + "/bn", x);
  return with_relu ? relu(name + "/relu", x) : x;
}

int GraphBuilder::separable_bn(const std::string& name, int in, Index out_channels, Index kernel,
                               const ConvGeometry& g, bool with_relu, bool pointwise_bn) {
  int x = depthwise(name + "/depthwise", in, kernel, g);
  x = batch_norm(name + "/depthwise/bn", x);
  x = relu(name + "/depthwise/relu", x);
  x = conv(name + "/pointwise", x, out_channels, 1);
  if (!pointwise_bn) return x;
  x = batch_norm(name + "/pointwise/bn", x);
  return with_relu ? relu(name + "/pointwise/relu", x) : x;
}

// ---------------------------------------------------------------------------
// Builders

int build_backbone(GraphBuilder& b, const PlannedArch& plan, int input) {
  const ArchSpec& spec = plan.spec;
  b.set_section("backbone");
  std::vector<const BlockSpec*> blocks;
  for (const auto& bs : spec.stem) blocks.push_back(&bs);
  for (const auto& bs : spec.body) blocks.push_back(&bs);

  int x = input;
  Index channels = spec.input_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& bs = *blocks[i];
    const PlannedBlock& pb = plan.blocks[i];
    for (int rep = 0; rep < bs.repeats; ++rep) {
      const bool first = rep == 0;
      const ConvGeometry lead{first ? pb.effective_stride : 1, first ? pb.input_rate : pb.rate,
                              Padding::same};
      const ConvGeometry rest{1, pb.rate, Padding::same};
      const bool projects = channels != bs.channels || (first && bs.nominal_stride != 1);
      const std::string name = bs.repeats > 1 ? bs.name + "/unit" + std::to_string(rep + 1) : bs.name;
      switch (bs.kind) {
        case BlockKind::standard_conv:
          x = b.conv_bn(name + "/conv", x, bs.channels, 3, lead);
          break;
        case BlockKind::separable_conv:
          x = b.separable_bn(name + "/sep", x, bs.channels, 3, lead, true, spec.pointwise_bn_relu);
          break;
        case BlockKind::xception_unit: {
          int y = b.separable_bn(name + "/sep1", x, bs.channels, 3, lead, true, spec.pointwise_bn_relu);
          y = b.separable_bn(name + "/sep2", y, bs.channels, 3, rest, true, spec.pointwise_bn_relu);
          y = b.separable_bn(name + "/sep3", y, bs.channels, 3, rest, false, spec.pointwise_bn_relu);
          if (bs.has_skip) {
            const int skip = projects ? b.conv_bn(name + "/shortcut", x, bs.channels, 1,
                                                  {lead.stride, 1, Padding::same}, false)
                                      : x;
            y = b.add(name + "/residual", y, skip);
          }
          x = b.relu(name + "/relu", y);
          break;
        }
        case BlockKind::residual_unit: {
          int y = b.conv_bn(name + "/conv1", x, bs.channels, 3, lead);
          y = b.conv_bn(name + "/conv2", y, bs.channels, 3, rest, false);
          if (bs.has_skip) {
            const int skip = projects ? b.conv_bn(name + "/shortcut", x, bs.channels, 1,
                                                  {lead.stride, 1, Padding::same}, false)
                                      : x;
            y = b.add(name + "/residual", y, skip);
          }
          x = b.relu(name + "/relu", y);
          break;
        }
      }
      channels = bs.channels;
    }
    if (static_cast<int>(i) == plan.conv2_block) b.tap("conv2", x);
    if (static_cast<int>(i) == plan.conv3_block) b.tap("conv3", x);
  }
  return x;
}

int build_aspp(GraphBuilder& b, int in, const std::vector<int>& rates, bool image_level,
               bool separable, Index channels) {
  b.set_section("aspp");
  std::vector<int> branches;
  branches.push_back(b.conv_bn("aspp/branch0", in, channels, 1, {}));
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const std::string name = "aspp/branch" + std::to_string(i + 1);
    const ConvGeometry g{1, rates[i], Padding::same};
    branches.push_back(separable ? b.separable_bn(name, in, channels, 3, g)
                                 : b.conv_bn(name, in, channels, 3, g));
  }
  if (image_level) {
    int p = b.global_pool("aspp/image_pool", in);
    p = b.conv_bn("aspp/image_pool/conv", p, channels, 1, {});
    branches.push_back(b.resize_like("aspp/image_pool/upsample", p, in));
  }
  const int cat = b.concat("aspp/concat", branches);
  return b.conv_bn("aspp/projection", cat, channels, 1, {});
}

int build_decoder(GraphBuilder& b, const PlannedArch& plan, int encoder, int input) {
  const ArchSpec& spec = plan.spec;
  int x = encoder;
  if (spec.decoder_enabled) {
    b.set_section("decoder");
    std::vector<std::pair<std::string, int>> taps;  // name, block index
    if (spec.decoder_low_level_taps == LowLevelTaps::conv2_conv3) {
      taps.emplace_back("conv3", plan.conv3_block);
    }
    taps.emplace_back("conv2", plan.conv2_block);
    for (const auto& [tap, block] : taps) {
      const int nominal = tap == "conv2" ? 4 : 8;
      if (block < 0) throw PlanError("decoder: backbone has no " + tap + " feature map");
      const int effective = plan.blocks[static_cast<std::size_t>(block)].effective_cumulative;
      if (effective != nominal) {
        throw PlanError("decoder: " + tap + " tap is at output stride " + std::to_string(effective) +
                        ", expected " + std::to_string(nominal));
      }
      const int low = b.graph().taps.at(tap);
      const std::string prefix = "decoder/" + tap;
      const int reduced = b.conv_bn(prefix + "_reduce", low, spec.decoder_reduce_channels, 1, {});
      const int up = b.resize_like(prefix + "_upsample", x, reduced);
      x = b.concat(prefix + "_concat", {up, reduced});
      for (std::size_t j = 0; j < spec.decoder_conv_structure.size(); ++j) {
        const DecoderConv& dc = spec.decoder_conv_structure[j];
        const std::string name = prefix + "_refine" + std::to_string(j + 1);
        x = spec.separable_heads && dc.kernel > 1
                ? b.separable_bn(name, x, dc.filters, dc.kernel, {})
                : b.conv_bn(name, x, dc.filters, dc.kernel, {});
      }
    }
  }
  b.set_section("head");
  x = b.conv("head/logits", x, spec.num_classes, 1);
  x = b.bias("head/logits", x);
  return b.resize_like("head/upsample", x, input);
}

LayerGraph build_model_graph(const PlannedArch& plan) {
  plan.spec.validate();
  LayerGraph graph;
  GraphBuilder b(graph);
  const int in = b.input();
  const int features = build_backbone(b, plan, in);
  const int enc = build_aspp(b, features, aspp_rates_at(plan.spec, plan.output_stride),
                             plan.spec.aspp_image_level, plan.spec.separable_heads,
                             plan.spec.encoder_channels);
  graph.taps["encoder"] = enc;
  graph.output = build_decoder(b, plan, enc, in);
  return graph;
}

// ---------------------------------------------------------------------------

ParamStore init_params(const ArchSpec& spec, std::uint64_t seed) {
  const LayerGraph graph = build_model_graph(plan_output_stride(spec));
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& [name, shape] : parameter_shapes(graph, spec.input_channels)) {
    Tensor value(shape);
    const auto ends_with = [&](const char* suffix) { return name.ends_with(suffix); };
    bool trainable = true;
    if (ends_with("/weights") || ends_with("/depthwise_weights")) {
      const double area = static_cast<double>(shape.h * shape.w);
      const double fan_in = static_cast<double>(shape.c) * area;
      const double fan_out = ends_with("/depthwise_weights") ? area : static_cast<double>(shape.n) * area;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index i = 0; i < value.size(); ++i) value.data()[i] = dist(rng);
    } else if (ends_with("/gamma") || ends_with("/moving_variance")) {
      value.vec().setOnes();
      trainable = ends_with("/gamma") && !spec.bn_frozen;
    } else if (ends_with("/moving_mean")) {
      trainable = false;
    } else if (ends_with("/beta")) {
      trainable = !spec.bn_frozen;
    }
    store.add(name, std::move(value), trainable);
  }
  return store;
}

Var forward(Tape& tape, const LayerGraph& graph, ParamStore& params, const ArchSpec& spec,
            const Tensor& x, Mode mode) {
  const bool training = mode == Mode::train;
  std::vector<Var> vars(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const LayerNode& n = graph.nodes[i];
    auto in = [&](std::size_t k) { return vars[static_cast<std::size_t>(n.inputs.at(k))]; };
    Var v;
    switch (n.kind) {
      case LayerKind::input:
        v = tape.constant(x, "input");
        break;
      case LayerKind::conv:
        v = ag::conv2d(tape, in(0), tape.parameter(params, n.name + "/weights"), n.geometry, n.name);
        break;
      case LayerKind::depthwise_conv:
        v = ag::depthwise_conv2d(tape, in(0), tape.parameter(params, n.name + "/depthwise_weights"),
                                 n.geometry, n.name);
        break;
      case LayerKind::batch_norm:
        v = ag::batch_norm(tape, in(0), params, n.name, training, spec.bn_epsilon, spec.bn_momentum,
                           spec.bn_frozen);
        break;
      case LayerKind::relu:
        v = ag::relu(tape, in(0), n.name);
        break;
      case LayerKind::bias:
        v = ag::bias(tape, in(0), tape.parameter(params, n.name + "/biases"), n.name);
        break;
      case LayerKind::add:
        v = ag::add(tape, in(0), in(1), n.name);
        break;
      case LayerKind::concat: {
        std::vector<Var> parts;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) parts.push_back(in(k));
        v = ag::concat(tape, parts, n.name);
        break;
      }
      case LayerKind::resize_like: {
        const Tensor& ref = tape.value(in(1));
        v = ag::resize(tape, in(0), ref.h(), ref.w(), n.name);
        break;
      }
      case LayerKind::global_pool:
        v = ag::global_avg_pool(tape, in(0), n.name);
        break;
    }
    vars[i] = v;
  }
  return vars[static_cast<std::size_t>(graph.output)];
}

Tensor forward(Model& model, const Tensor& x, Mode mode, int output_stride) {
  const int os = output_stride > 0 ? output_stride : model.spec.target_output_stride;
  if (x.h() < os || x.w() < os) {
    throw ShapeError("input " + x.shape().str() + " is smaller than output stride " +
                     std::to_string(os));
  }
  const LayerGraph graph = build_model_graph(plan_output_stride(model.spec, os));
  Tape tape;
  tape.set_grad_enabled(false);
  const Var logits = forward(tape, graph, model.params, model.spec, x, mode);
  return tape.value(logits);
}

Index scaled_extent(Index extent, double scale) {
  const auto v = static_cast<Index>(std::lround(static_cast<double>(extent) * scale));
  return v < 1 ? 1 : v;
}

Tensor predict_multiscale(Model& model, const Tensor& x, std::span<const double> scales, bool flip,
                          int output_stride) {
  if (scales.empty()) throw ShapeError("predict_multiscale: no scales");
  Tensor acc(Shape{x.n(), model.spec.num_classes, x.h(), x.w()});
  for (double s : scales) {
    const Index h = scaled_extent(x.h(), s);
    const Index w = scaled_extent(x.w(), s);
    const Tensor xs = bilinear_resize(x, h, w);
    Tensor p = bilinear_resize(softmax_channels(forward(model, xs, Mode::eval, output_stride)), x.h(), x.w());
    if (flip) {
      const Tensor pf = softmax_channels(forward(model, flip_horizontal(xs), Mode::eval, output_stride));
      const Tensor q = bilinear_resize(flip_horizontal(pf), x.h(), x.w());
      acc.vec() += p.vec() + q.vec();
    } else {
      acc.vec() += p.vec();
    }
  }
  acc.vec() /= static_cast<double>(scales.size() * (flip ? 2 : 1));
  return acc;
}

}  // namespace aseg
