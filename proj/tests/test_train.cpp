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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "aseg/optim.hpp"
#include "aseg/trainer.hpp"
#include "checks.hpp"

using namespace aseg;
using namespace aseg::testing;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.model.backbone.stem_channels = 4;
  cfg.model.backbone.stage_channels = {4, 6, 8};
  cfg.model.backbone.units_per_stage = 1;
  cfg.model.num_classes = 3;
  cfg.model.encoder_channels = 8;
  cfg.model.decoder_reduce_channels = 4;
  cfg.model.decoder_structure = {{3, 8}};
  cfg.train.max_iter = 6;
  cfg.train.batch = 2;
  cfg.train.crop = 32;
  cfg.data.side = 32;
  cfg.data.train_count = 6;
  cfg.data.eval_count = 3;
  return cfg;
}

Batch fixed_batch(const RunConfig& cfg) {
  const auto samples = gen_shapes_dataset(2, 32, cfg.model.num_classes, 99);
  Batch b;
  b.images = Tensor(Shape{2, 3, 32, 32});
  for (int i = 0; i < 2; ++i) {
    b.images.sample(i) = samples[static_cast<std::size_t>(i)].image.sample(0);
    b.labels.push_back(samples[static_cast<std::size_t>(i)].label);
  }
  return b;
}

}  // namespace

TEST_CASE("poly schedule") {
  const PolySchedule s{0.007, 0.9, 1000};
  CHECK(lr_at(s, 0) == 0.007);
  CHECK(lr_at(s, 1000) == 0.0);
  CHECK(lr_at(s, 1500) == 0.0);
  CHECK(lr_at(s, 500) == doctest::Approx(0.007 * std::pow(0.5, 0.9)).epsilon(1e-15));
  CHECK(lr_at(s, 500) == doctest::Approx(0.003752).epsilon(1e-3));
  double prev = lr_at(s, 0);
  for (std::int64_t i = 1; i <= 1000; ++i) {
    const double lr = lr_at(s, i);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS((PolySchedule{0.0, 0.9, 10}.validate()), ConfigError);
  CHECK_THROWS_AS((PolySchedule{0.1, 0.0, 10}.validate()), ConfigError);
  CHECK_THROWS_AS((PolySchedule{0.1, 0.9, 0}.validate()), ConfigError);
}

TEST_CASE("sgd on a quadratic without momentum") {
  ParamStore p;
  p.add("w", Tensor::constant({1, 1, 1, 1}, 1.0));
  SgdState st{0.0, 0.0, {}};
  for (int i = 0; i < 2; ++i) {
    auto& e = p.at("w");
    e.grad = e.value;  // d/dw of w^2 / 2
    sgd_step(p, st, 0.1);
  }
  CHECK(p.at("w").value(0, 0, 0, 0) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(p.at("w").grad.vec().isZero(0.0));
}

TEST_CASE("sgd update rule with momentum and weight decay") {
  ParamStore p;
  p.add("w", Tensor::constant({1, 1, 1, 2}, 2.0));
  p.add("stat", Tensor::constant({1, 1, 1, 2}, 5.0), false);
  SgdState st{0.9, 0.1, {}};
  p.at("w").grad = Tensor::constant({1, 1, 1, 2}, 1.0);
  p.at("stat").grad = Tensor::constant({1, 1, 1, 2}, 1.0);
  sgd_step(p, st, 0.5);
  // v = 1 + 0.1 * 2 = 1.2, w = 2 - 0.6
  CHECK(p.at("w").value(0, 0, 0, 0) == doctest::Approx(1.4));
  CHECK(p.at("stat").value.vec().isConstant(5.0, 0.0));
  p.at("w").grad = Tensor::constant({1, 1, 1, 2}, 1.0);
  sgd_step(p, st, 0.5);
  // v = 0.9 * 1.2 + 1 + 0.14 = 2.22, w = 1.4 - 1.11
  CHECK(p.at("w").value(0, 0, 0, 1) == doctest::Approx(0.29));

  ParamStore q = p;
  q.at("w").grad = Tensor::constant({1, 1, 1, 2}, 3.0);
  sgd_step(q, st, 0.0);
  CHECK(q.at("w").value.vec() == p.at("w").value.vec());

  ParamStore bad;
  bad.add("w", Tensor::constant({1, 1, 1, 2}, 1.0));
  bad.at("w").grad = Tensor();
  SgdState fresh;
  CHECK_THROWS_AS(sgd_step(bad, fresh, 0.1), ShapeError);
}

TEST_CASE("plain gradient descent when momentum and decay are zero") {
  std::mt19937_64 rng(71);
  ParamStore p;
  p.add("w", random_tensor({2, 3, 3, 3}, rng));
  const Tensor w0 = p.at("w").value;
  const Tensor g = random_tensor(w0.shape(), rng);
  p.at("w").grad = g;
  SgdState st{0.0, 0.0, {}};
  sgd_step(p, st, 0.25);
  CHECK(max_abs_diff(p.at("w").value, add(w0, scale(g, -0.25))) == 0.0);
}

TEST_CASE("loss decreases on a fixed batch at a small learning rate") {
  const RunConfig cfg = tiny_config();
  Model m{cfg.arch(), init_params(cfg.arch(), 3)};
  const LayerGraph graph = build_model_graph(plan_output_stride(m.spec));
  const Batch b = fixed_batch(cfg);
  // Plain gradient steps. The freshly initialised batch-norm stack is sharp
  // (squared gradient norm near 4e4, mostly in the stem), so 1e-3 overshoots.
  SgdState st{0.0, 0.0, {}};
  std::vector<double> losses;
  for (int i = 0; i < 11; ++i) losses.push_back(train_step(m, graph, b, st, 1e-6));
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
}

TEST_CASE("training trajectories are bit-identical for identical seeds") {
  const RunConfig cfg = tiny_config();
  const auto samples = load_train_split(cfg);
  const auto run = [&] {
    Model m{cfg.arch(), init_params(cfg.arch(), cfg.train.seed)};
    return train_model(m, samples, cfg);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == 6);
  CHECK(format_loss_log(a) == format_loss_log(b));
  CHECK(a.front().iter == 1);
  CHECK(a.front().lr == cfg.train.base_lr);
}

TEST_CASE("resuming at iteration k replays the same batches and schedule") {
  const RunConfig cfg = tiny_config();
  const auto samples = load_train_split(cfg);
  const AugmentOptions aug = cfg.augment();
  for (std::int64_t it : {0, 2, 5, 17}) {
    const Batch a = make_batch(samples, aug, cfg.train.batch, cfg.train.seed, it);
    const Batch b = make_batch(samples, aug, cfg.train.batch, cfg.train.seed, it);
    CHECK(a.images.vec() == b.images.vec());
    CHECK(a.labels == b.labels);
    CHECK(a.images.shape() == Shape{2, 3, 32, 32});
  }
  Model m{cfg.arch(), init_params(cfg.arch(), 1)};
  const auto tail = train_model(m, samples, cfg, 4);
  REQUIRE(tail.size() == 2);
  CHECK(tail[0].iter == 5);
  CHECK(tail[0].lr == lr_at(cfg.schedule(), 4));
}

TEST_CASE("a frozen model keeps a constant loss") {
  RunConfig cfg = tiny_config();
  cfg.model.bn_frozen = true;
  Model m{cfg.arch(), init_params(cfg.arch(), 4)};
  for (auto& [name, e] : m.params) e.trainable = false;
  const LayerGraph graph = build_model_graph(plan_output_stride(m.spec));
  const Batch b = fixed_batch(cfg);
  SgdState st;
  const double first = train_step(m, graph, b, st, 0.1);
  for (int i = 0; i < 3; ++i) CHECK(train_step(m, graph, b, st, 0.1) == first);
}

TEST_CASE("non-finite losses raise a numeric error naming the tensor") {
  const RunConfig cfg = tiny_config();
  Model m{cfg.arch(), init_params(cfg.arch(), 5)};
  m.params.at("head/logits/biases").value(0, 1, 0, 0) = std::numeric_limits<double>::infinity();
  const LayerGraph graph = build_model_graph(plan_output_stride(m.spec));
  SgdState st;
  try {
    train_step(m, graph, fixed_batch(cfg), st, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("head/logits") != std::string::npos);
  }
}

TEST_CASE("evaluation of perfect predictions scores one") {
  const RunConfig cfg = tiny_config();
  const auto samples = load_eval_split(cfg);
  std::vector<LabelMap> gt;
  for (const auto& s : samples) gt.push_back(s.label);
  const EvalResult r = evaluate_predictions(gt, gt, 3, {1, 3});
  CHECK(r.iou.mean == 1.0);
  for (const auto& t : r.trimap) CHECK(*t == 1.0);
  const std::string csv = format_eval_csv(r);
  CHECK(csv.starts_with("metric,value\nmiou,1\n"));
}

TEST_CASE("evaluate reports the cost of the evaluated configuration") {
  RunConfig cfg = tiny_config();
  Model m{cfg.arch(), init_params(cfg.arch(), 6)};
  const auto samples = load_eval_split(cfg);
  EvalOptions o = eval_options(cfg);
  const EvalResult a = evaluate(m, samples, o);
  o.flip = true;
  const EvalResult b = evaluate(m, samples, o);
  CHECK(b.multiply_adds == 2 * a.multiply_adds);
  o.flip = false;
  o.output_stride = 8;
  const EvalResult c = evaluate(m, samples, o);
  CHECK(c.multiply_adds > a.multiply_adds);
  o.output_stride = 64;
  CHECK_THROWS_AS(evaluate(m, samples, o), PlanError);
}
