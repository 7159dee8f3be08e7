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

// Measurements shared by the unit tests and the acceptance binary. Each
// returns the worst error it saw so callers apply their own tolerance.

#ifndef ASEG_TESTS_CHECKS_HPP
#define ASEG_TESTS_CHECKS_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aseg/autodiff.hpp"
#include "aseg/cost.hpp"
#include "aseg/model.hpp"
#include "aseg/nn.hpp"
#include "test_util.hpp"

namespace aseg::testing {

/// Max abs error of conv2d, depthwise, pointwise and separable convolution
/// against the direct-summation oracle over k in {1,3,5}, r in {1,2,4},
/// stride in {1,2}, SAME and VALID, on random inputs up to 9x9.
inline double conv_oracle_grid_error(std::uint64_t seed, int* cases = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> side(1, 9);
  double worst = 0.0;
  int count = 0;
  for (Index k : {1, 3, 5})
    for (Index r : {1, 2, 4})
      for (Index s : {1, 2})
        for (Padding pad : {Padding::same, Padding::valid}) {
          const ConvGeometry g{s, r, pad};
          const Index extent = effective_extent(k, r);
          for (int trial = 0; trial < 4; ++trial) {
            Index h = side(rng), w = side(rng);
            if (pad == Padding::valid) {
              if (extent > 9) break;
              h = std::max(h, extent);
              w = std::max(w, extent);
            }
            const Tensor x = random_tensor({2, 3, h, w}, rng);
            const Tensor wd = random_tensor({4, 3, k, k}, rng);
            const Tensor wdw = random_tensor({3, 1, k, k}, rng);
            const Tensor wpw = random_tensor({5, 3, 1, 1}, rng);
            worst = std::max(worst, max_abs_diff(conv2d(x, wd, g), conv_oracle(x, wd, g, false)));
            const Tensor dw = conv_oracle(x, wdw, g, true);
            worst = std::max(worst, max_abs_diff(depthwise_conv2d(x, wdw, g), dw));
            worst = std::max(worst, max_abs_diff(pointwise_conv2d(x, wpw),
                                                 conv_oracle(x, wpw, ConvGeometry{}, false)));
            worst = std::max(worst, max_abs_diff(separable_conv2d(x, wdw, wpw, g),
                                                 conv_oracle(dw, wpw, ConvGeometry{}, false)));
            ++count;
          }
        }
  if (cases != nullptr) *cases = count;
  return worst;
}

/// Checks the gradient that `build` sends into every store entry, using the
/// scalar sum(output * r) for a fixed random r. Returns the worst relative
/// error across entries.
inline double tape_gradient_error(ParamStore& store,
                                  const std::function<Var(Tape&)>& build, std::mt19937_64& rng) {
  Tensor r;
  {
    Tape probe;
    probe.set_grad_enabled(false);
    r = random_tensor(probe.value(build(probe)).shape(), rng);
  }
  store.zero_grad();
  Tape tape;
  const Var out = build(tape);
  tape.backward(out, r);
  const auto loss = [&] {
    Tape t;
    t.set_grad_enabled(false);
    return dot(t.value(build(t)), r);
  };
  double worst = 0.0;
  for (auto& [name, entry] : store) {
    if (!entry.trainable) continue;
    const Tensor numeric = numeric_gradient(loss, entry.value);
    worst = std::max(worst, relative_error(entry.grad, numeric));
  }
  return worst;
}

/// Worst relative error over every differentiable tape operation on small
/// random shapes.
inline double op_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const auto run = [&](ParamStore& store, const std::function<Var(Tape&)>& build) {
    worst = std::max(worst, tape_gradient_error(store, build, rng));
  };

  for (const ConvGeometry g : {ConvGeometry{1, 1, Padding::same}, ConvGeometry{2, 2, Padding::same},
                               ConvGeometry{1, 2, Padding::valid}}) {
    ParamStore s;
    s.add("x", random_tensor({2, 3, 7, 6}, rng));
    s.add("w", random_tensor({4, 3, 3, 3}, rng));
    s.add("d", random_tensor({3, 1, 3, 3}, rng));
    run(s, [&](Tape& t) { return ag::conv2d(t, t.parameter(s, "x"), t.parameter(s, "w"), g, "conv"); });
    run(s, [&](Tape& t) {
      return ag::depthwise_conv2d(t, t.parameter(s, "x"), t.parameter(s, "d"), g, "dw");
    });
  }
  {
    ParamStore s;
    s.add("x", random_tensor({2, 3, 4, 5}, rng));
    s.add("y", random_tensor({2, 3, 4, 5}, rng));
    s.add("z", random_tensor({2, 2, 4, 5}, rng));
    s.add("b", random_tensor({1, 3, 1, 1}, rng));
    run(s, [&](Tape& t) { return ag::bias(t, t.parameter(s, "x"), t.parameter(s, "b"), "bias"); });
    run(s, [&](Tape& t) { return ag::relu(t, t.parameter(s, "x"), "relu"); });
    run(s, [&](Tape& t) { return ag::add(t, t.parameter(s, "x"), t.parameter(s, "y"), "add"); });
    run(s, [&](Tape& t) {
      const Var x = t.parameter(s, "x");
      return ag::add(t, x, x, "twice");
    });
    run(s, [&](Tape& t) {
      return ag::concat(t, {t.parameter(s, "x"), t.parameter(s, "z"), t.parameter(s, "y")}, "cat");
    });
    run(s, [&](Tape& t) { return ag::resize(t, t.parameter(s, "x"), 9, 7, "up"); });
    run(s, [&](Tape& t) { return ag::resize(t, t.parameter(s, "x"), 2, 3, "down"); });
    run(s, [&](Tape& t) { return ag::global_avg_pool(t, t.parameter(s, "x"), "pool"); });
  }
  for (const bool training : {true, false}) {
    ParamStore s;
    s.add("x", random_tensor({2, 3, 3, 4}, rng));
    s.add("bn/gamma", random_tensor({1, 3, 1, 1}, rng, 0.5, 1.5));
    s.add("bn/beta", random_tensor({1, 3, 1, 1}, rng));
    s.add("bn/moving_mean", random_tensor({1, 3, 1, 1}, rng), false);
    s.add("bn/moving_variance", random_tensor({1, 3, 1, 1}, rng, 0.5, 1.5), false);
    run(s, [&](Tape& t) {
      return ag::batch_norm(t, t.parameter(s, "x"), s, "bn", training, 1e-5, 0.1, false);
    });
  }
  return worst;
}

/// The narrow toy model used for the end-to-end gradient check.
inline ArchSpec tiny_toy_spec(int num_classes = 3) {
  ToyBackbone bb;
  bb.stem_channels = 4;
  bb.stage_channels = {4, 6, 8};
  bb.units_per_stage = 1;
  ArchSpec spec = make_toy_spec(bb);
  spec.num_classes = num_classes;
  spec.encoder_channels = 8;
  spec.decoder_reduce_channels = 4;
  spec.decoder_conv_structure = {{3, 8}, {3, 8}};
  return spec;
}

struct ModelGradientReport {
  double worst = 0.0;
  std::string worst_param;
  Index checked = 0;
};

/// Cross-entropy gradient of every trainable parameter of the tiny toy model
/// (3 classes, train-mode batch norm) against central differences. Each
/// batch-norm needs several values per channel: with one or two its output
/// barely depends on the input and the check measures roundoff only.
inline ModelGradientReport model_gradient_error(std::uint64_t seed, Index side = 16, Index batch = 2,
                                                int output_stride = 8) {
  std::mt19937_64 rng(seed);
  const ArchSpec spec = tiny_toy_spec(3);
  ParamStore params = init_params(spec, seed);
  for (auto& [name, e] : params) {
    if (name.ends_with("/gamma") || name.ends_with("/beta") || name.ends_with("/biases")) {
      e.value = random_tensor(e.value.shape(), rng, 0.5, 1.5);
    }
  }
  const LayerGraph graph = build_model_graph(plan_output_stride(spec, output_stride));
  const Tensor x = random_tensor({batch, 3, side, side}, rng, 0.0, 1.0);
  std::vector<LabelMap> labels(static_cast<std::size_t>(batch), LabelMap(side, side));
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& m : labels)
    for (auto& v : m.data) v = static_cast<ClassId>(cls(rng));
  labels[0](3, 4) = kVoid;
  const std::span<const LabelMap> span(labels);

  params.zero_grad();
  {
    Tape tape;
    const Var logits = forward(tape, graph, params, spec, x, Mode::train);
    tape.backward(logits, softmax_cross_entropy(tape.value(logits), span).dlogits);
  }
  const auto loss = [&] {
    Tape t;
    t.set_grad_enabled(false);
    return softmax_cross_entropy(t.value(forward(t, graph, params, spec, x, Mode::train)), span).loss;
  };
  ModelGradientReport rep;
  for (auto& [name, e] : params) {
    if (!e.trainable) continue;
    const double err = relative_error(e.grad, numeric_gradient(loss, e.value));
    rep.checked += e.value.size();
    if (err >= rep.worst) {
      rep.worst = err;
      rep.worst_param = name;
    }
  }
  return rep;
}

/// Plain conv/BN/ReLU stack with five stride-2 stages (nominal OS 32).
inline ArchSpec plain_stack_spec() {
  ArchSpec spec;
  spec.stem = {{"stem1", BlockKind::standard_conv, 1, 4, 2, false},
               {"stem2", BlockKind::standard_conv, 1, 4, 2, false}};
  spec.body = {{"stage1", BlockKind::standard_conv, 1, 5, 2, false},
               {"stage2", BlockKind::standard_conv, 2, 6, 2, false},
               {"stage3", BlockKind::standard_conv, 2, 6, 2, false}};
  return spec;
}

inline LayerGraph backbone_graph(const PlannedArch& plan) {
  LayerGraph graph;
  GraphBuilder b(graph);
  graph.output = build_backbone(b, plan, b.input());
  return graph;
}

struct AtrousTrickReport {
  double max_error = 0.0;
  int positions = 0;
};

// Output positions of a conv chain whose receptive field stays inside the
// input, one axis at a time.
inline std::vector<bool> interior_positions(const LayerGraph& graph, Index in) {
  std::vector<bool> ok(static_cast<std::size_t>(in), true);
  for (const LayerNode& n : graph.nodes) {
    if (n.kind != LayerKind::conv && n.kind != LayerKind::depthwise_conv) continue;
    const AxisPlan p = plan_axis(static_cast<Index>(ok.size()), n.kernel, n.geometry);
    std::vector<bool> next(static_cast<std::size_t>(p.out), true);
    for (Index o = 0; o < p.out; ++o) {
      for (Index t = 0; t < n.kernel; ++t) {
        const Index i = o * n.geometry.stride - p.pad + t * n.geometry.rate;
        if (i < 0 || i >= static_cast<Index>(ok.size()) || !ok[static_cast<std::size_t>(i)]) {
          next[static_cast<std::size_t>(o)] = false;
        }
      }
    }
    ok = std::move(next);
  }
  return ok;
}

/// Runs the plain stack at OS 32 and at OS 16 with the same weights (eval
/// mode batch norm with random statistics) and compares the stride-2
/// subsample of the OS-16 features with the OS-32 features at positions whose
/// receptive field avoids padding in both plans.
inline AtrousTrickReport atrous_trick_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ArchSpec spec = plain_stack_spec();
  const PlannedArch p32 = plan_output_stride(spec, 32);
  const PlannedArch p16 = plan_output_stride(spec, 16);
  const LayerGraph g32 = backbone_graph(p32);
  const LayerGraph g16 = backbone_graph(p16);
  ParamStore params;
  for (const auto& [name, shape] : parameter_shapes(g32, spec.input_channels)) {
    const bool variance = name.ends_with("/moving_variance") || name.ends_with("/gamma");
    params.add(name, random_tensor(shape, rng, variance ? 0.5 : -0.5, variance ? 1.5 : 0.5));
  }
  const Index side = 384;
  const Tensor x = random_tensor({1, 3, side, side}, rng);
  const auto run = [&](const LayerGraph& g) {
    Tape t;
    t.set_grad_enabled(false);
    return t.value(forward(t, g, params, spec, x, Mode::eval));
  };
  const Tensor f32 = run(g32);
  const Tensor f16 = run(g16);
  const std::vector<bool> in32 = interior_positions(g32, side);
  const std::vector<bool> in16 = interior_positions(g16, side);
  AtrousTrickReport rep;
  for (Index c = 0; c < f32.c(); ++c)
    for (Index y = 0; y < f32.h(); ++y)
      for (Index x0 = 0; x0 < f32.w(); ++x0) {
        const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x0);
        if (!in32[uy] || !in32[ux] || !in16[2 * uy] || !in16[2 * ux]) continue;
        rep.max_error = std::max(rep.max_error, std::abs(f32(0, c, y, x0) - f16(0, c, 2 * y, 2 * x0)));
        ++rep.positions;
      }
  return rep;
}

struct SeparableRatioReport {
  double max_deviation = 0.0;  // |observed - (1/C_out + 1/(kh*kw))|
  int layers = 0;
  std::int64_t standard_total = 0;
  std::int64_t separable_total = 0;
};

/// Compares every 3x3 head convolution with its separable replacement.
inline SeparableRatioReport separable_ratio_report(ArchSpec spec, const Shape& input) {
  spec.separable_heads = false;
  const CostReport plain = count_multiply_adds(plan_output_stride(spec), input);
  spec.separable_heads = true;
  const CostReport sep = count_multiply_adds(plan_output_stride(spec), input);
  std::map<std::string, std::int64_t> sep_cost;
  for (const CostRecord& r : sep.records) sep_cost[r.name] = r.multiply_adds;
  SeparableRatioReport rep;
  rep.standard_total = plain.total;
  rep.separable_total = sep.total;
  for (const CostRecord& r : plain.records) {
    if (r.section == "backbone" || r.kind != "conv" || r.kernel == 1) continue;
    const auto dw = sep_cost.find(r.name + "/depthwise");
    const auto pw = sep_cost.find(r.name + "/pointwise");
    if (dw == sep_cost.end() || pw == sep_cost.end()) {
      rep.max_deviation = INFINITY;
      continue;
    }
    const double observed = static_cast<double>(dw->second + pw->second) / static_cast<double>(r.multiply_adds);
    const double expected = 1.0 / static_cast<double>(r.output.c) + 1.0 / static_cast<double>(r.kernel * r.kernel);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(observed - expected));
    ++rep.layers;
  }
  return rep;
}

}  // namespace aseg::testing

#endif  // ASEG_TESTS_CHECKS_HPP
