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

#include "aseg/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "aseg/cost.hpp"

namespace aseg {

namespace {

constexpr std::uint64_t kOrderStream = 0x6f72646572000000ULL;
constexpr std::uint64_t kAugmentStream = 0x6175676d00000000ULL;

std::string shortest(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::vector<Sample> load_train_split(const RunConfig& cfg) {
  const auto& d = cfg.data;
  std::vector<Sample> out = d.train_manifest.empty()
                                ? gen_shapes_dataset(d.train_count, d.side, cfg.model.num_classes, d.seed)
                                : load_samples(load_manifest(d.train_manifest));
  for (const Sample& x : out) validate_labels(x.label, cfg.model.num_classes);
  return out;
}

std::vector<Sample> load_eval_split(const RunConfig& cfg) {
  const auto& d = cfg.data;
  std::vector<Sample> out =
      d.eval_manifest.empty()
          ? gen_shapes_dataset(d.eval_count, d.side, cfg.model.num_classes, d.seed, d.train_count)
          : load_samples(load_manifest(d.eval_manifest));
  for (const Sample& x : out) validate_labels(x.label, cfg.model.num_classes);
  return out;
}

std::vector<std::string> eval_label_names(const RunConfig& cfg) {
  std::vector<std::string> names;
  if (!cfg.data.eval_manifest.empty()) {
    for (const auto& [img, lab] : load_manifest(cfg.data.eval_manifest).entries) {
      names.push_back(std::filesystem::path(lab).filename().string());
    }
    return names;
  }
  for (int i = 0; i < cfg.data.eval_count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d.pgm", i);
    names.emplace_back(buf);
  }
  return names;
}

Batch make_batch(const std::vector<Sample>& samples, const AugmentOptions& aug, int batch_size,
                 std::uint64_t seed, std::int64_t iteration) {
  if (samples.empty()) throw DataError("training set is empty");
  const auto n = static_cast<std::int64_t>(samples.size());
  Batch b;
  b.images = Tensor(Shape{batch_size, samples.front().image.c(), aug.crop, aug.crop});
  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> order(samples.size());
  for (int j = 0; j < batch_size; ++j) {
    const std::int64_t k = iteration * batch_size + j;
    const std::int64_t epoch = k / n;
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(seed ^ kOrderStream, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
      cached_epoch = epoch;
    }
    const Sample& src = samples[order[static_cast<std::size_t>(k % n)]];
    Sample a = augment(src, aug, derive_seed(seed ^ kAugmentStream, static_cast<std::uint64_t>(k)));
    b.images.sample(j) = a.image.sample(0);
    b.labels.push_back(std::move(a.label));
  }
  return b;
}

std::string format_loss_log(const std::vector<TrainLogRow>& rows) {
  std::string out = "iter,lr,loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iter) + "," + shortest(r.lr) + "," + shortest(r.loss) + "\n";
  }
  return out;
}

std::vector<TrainLogRow> train_model(Model& model, const std::vector<Sample>& samples,
                                     const RunConfig& cfg, std::int64_t start_iter,
                                     const std::function<bool(const TrainLogRow&)>& on_step) {
  const PolySchedule sched = cfg.schedule();
  sched.validate();
  const AugmentOptions aug = cfg.augment();
  const LayerGraph graph = build_model_graph(plan_output_stride(model.spec));
  SgdState sgd;
  sgd.momentum = cfg.train.momentum;
  sgd.weight_decay = cfg.train.weight_decay;
  model.params.zero_grad();
  std::vector<TrainLogRow> rows;
  for (std::int64_t it = start_iter; it < sched.max_iter; ++it) {
    const Batch batch = make_batch(samples, aug, cfg.train.batch, cfg.train.seed, it);
    const double lr = lr_at(sched, it);
    TrainLogRow row{it + 1, lr, train_step(model, graph, batch, sgd, lr)};
    rows.push_back(row);
    if (on_step && !on_step(row)) break;
  }
  return rows;
}

EvalOptions eval_options(const RunConfig& cfg) {
  return EvalOptions{cfg.eval_output_stride(), cfg.eval.ms_scales, cfg.eval.flip, cfg.eval.trimap_widths};
}

EvalResult evaluate(Model& model, const std::vector<Sample>& samples, const EvalOptions& opt) {
  if (samples.empty()) throw DataError("evaluation set is empty");
  const PlannedArch plan = plan_output_stride(model.spec, opt.output_stride);
  std::vector<LabelMap> gt, pred;
  for (const Sample& s : samples) {
    const Tensor probs = predict_multiscale(model, s.image, opt.scales, opt.flip, opt.output_stride);
    pred.push_back(argmax_labels(probs));
    gt.push_back(s.label);
  }
  EvalResult r = evaluate_predictions(gt, pred, model.spec.num_classes, opt.trimap_widths);
  r.options = opt;
  const Sample& first = samples.front();
  r.multiply_adds = multiscale_multiply_adds(
      plan, Shape{1, first.image.c(), first.image.h(), first.image.w()}, opt.scales, opt.flip);
  return r;
}

EvalResult evaluate_predictions(const std::vector<LabelMap>& gt, const std::vector<LabelMap>& pred,
                                int num_classes, const std::vector<int>& trimap_widths) {
  if (gt.size() != pred.size()) throw DataError("prediction count does not match ground truth count");
  ConfusionMatrix cm(num_classes);
  TrimapAccumulator tri(num_classes, trimap_widths);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    cm.add(gt[i], pred[i]);
    tri.add(gt[i], pred[i]);
  }
  EvalResult r;
  r.options.trimap_widths = trimap_widths;
  r.iou = miou(cm);
  r.trimap = tri.results();
  return r;
}

std::string format_eval_csv(const EvalResult& r) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "miou," << shortest(r.iou.mean) << "\n";
  for (std::size_t k = 0; k < r.iou.per_class.size(); ++k) {
    os << "iou_class_" << k << "," << (r.iou.per_class[k] ? shortest(*r.iou.per_class[k]) : "nan") << "\n";
  }
  for (std::size_t i = 0; i < r.trimap.size(); ++i) {
    os << "trimap_" << r.options.trimap_widths[i] << ","
       << (r.trimap[i] ? shortest(*r.trimap[i]) : "nan") << "\n";
  }
  os << "multiply_adds," << r.multiply_adds << "\n";
  return os.str();
}

}  // namespace aseg
