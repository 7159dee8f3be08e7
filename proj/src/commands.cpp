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

#include "aseg/commands.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "aseg/cost.hpp"
#include "aseg/netpbm.hpp"

namespace aseg {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Architecture-defining part of a config, for resume compatibility checks.
std::string arch_signature(const RunConfig& cfg) {
  std::string out;
  for (const auto& key : config_keys()) {
    if (key.starts_with("model.") || key.starts_with("aspp.") || key.starts_with("decoder.") ||
        key.starts_with("bn.")) {
      out += key + "=" + get_config_value(cfg, key) + "\n";
    }
  }
  return out;
}

std::vector<TrainLogRow> read_loss_log(const fs::path& path, std::int64_t up_to) {
  std::vector<TrainLogRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    TrainLogRow r;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) continue;
    std::from_chars(a.data(), a.data() + a.size(), r.iter);
    std::from_chars(b.data(), b.data() + b.size(), r.lr);
    std::from_chars(c.data(), c.data() + c.size(), r.loss);
    if (r.iter <= up_to) rows.push_back(r);
  }
  return rows;
}

}  // namespace

// train ---------------------------------------------------------------------

TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& out_dir, const std::optional<fs::path>& resume,
                       std::ostream* progress) {
  cfg.validate();
  fs::create_directories(out_dir);
  write_text(out_dir / "config.txt", format_config(cfg));
  const std::vector<Sample> train = load_train_split(cfg);

  TrainOutcome o;
  o.model.spec = cfg.arch();
  std::int64_t start = 0;
  std::vector<TrainLogRow> rows;
  if (resume) {
    Checkpoint ckpt = load_checkpoint(*resume);
    if (arch_signature(ckpt.config) != arch_signature(cfg)) {
      throw ConfigError("checkpoint '" + resume->string() + "' was trained with a different architecture");
    }
    o.model.params = std::move(ckpt.params);
    start = ckpt.iteration;
    rows = read_loss_log(out_dir / "loss_log.csv", start);
  } else {
    o.model.params = init_params(o.model.spec, cfg.train.seed);
  }

  const auto save = [&](std::int64_t iteration) {
    Checkpoint ckpt{cfg, iteration, o.model.params};
    save_checkpoint(out_dir / "checkpoint.ckpt", ckpt);
  };
  const auto on_step = [&](const TrainLogRow& row) {
    rows.push_back(row);
    if (progress && (row.iter % 50 == 0 || row.iter == cfg.train.max_iter)) {
      *progress << "iter " << row.iter << "/" << cfg.train.max_iter << "  lr " << row.lr << "  loss "
                << row.loss << "\n";
    }
    if (row.iter % cfg.train.checkpoint_every == 0 && row.iter != cfg.train.max_iter) {
      save(row.iter);
      write_text(out_dir / "loss_log.csv", format_loss_log(rows));
    }
    return true;
  };
  try {
    train_model(o.model, train, cfg, start, on_step);
  } catch (const NumericError&) {
    write_text(out_dir / "loss_log.csv", format_loss_log(rows));
    throw;
  }
  o.iteration = cfg.train.max_iter;
  save(o.iteration);
  write_text(out_dir / "loss_log.csv", format_loss_log(rows));
  o.log = std::move(rows);
  return o;
}

// eval ----------------------------------------------------------------------

EvalResult cmd_eval(const Checkpoint& ckpt, const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  Model model{ckpt.config.arch(), ckpt.params};
  const EvalOptions opt = eval_options(cfg);
  plan_output_stride(model.spec, opt.output_stride);
  const EvalResult r = evaluate(model, load_eval_split(cfg), opt);
  if (!out_dir.empty()) write_text(out_dir / "metrics.csv", format_eval_csv(r));
  return r;
}

EvalResult cmd_eval_predictions(const fs::path& predictions, const RunConfig& cfg,
                                const fs::path& out_dir) {
  const std::vector<Sample> eval = load_eval_split(cfg);
  const std::vector<std::string> names = eval_label_names(cfg);
  std::vector<LabelMap> gt, pred;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    gt.push_back(eval[i].label);
    pred.push_back(read_pgm_labels(predictions / names[i]));
    if (pred.back().h != gt.back().h || pred.back().w != gt.back().w) {
      throw DataError("prediction '" + names[i] + "' differs in size from its ground truth");
    }
  }
  const EvalResult r = evaluate_predictions(gt, pred, cfg.model.num_classes, cfg.eval.trimap_widths);
  if (!out_dir.empty()) write_text(out_dir / "metrics.csv", format_eval_csv(r));
  return r;
}

// infer ---------------------------------------------------------------------

std::array<std::uint8_t, 3> palette_color(ClassId k) {
  if (k == kVoid) return {255, 255, 255};
  std::array<std::uint8_t, 3> c{0, 0, 0};
  int v = k;
  for (int shift = 7; v > 0 && shift >= 0; --shift) {
    for (int ch = 0; ch < 3; ++ch) {
      c[static_cast<std::size_t>(ch)] |= static_cast<std::uint8_t>(((v >> ch) & 1) << shift);
    }
    v >>= 3;
  }
  return c;
}

InferOutcome cmd_infer(const Checkpoint& ckpt, const RunConfig& cfg, const fs::path& image,
                       const fs::path& out_prefix) {
  Model model{ckpt.config.arch(), ckpt.params};
  const Tensor x = read_ppm(image);
  const EvalOptions opt = eval_options(cfg);
  const Tensor probs = predict_multiscale(model, x, opt.scales, opt.flip, opt.output_stride);
  InferOutcome o;
  o.labels = argmax_labels(probs);
  o.label_path = out_prefix;
  o.label_path += "_labels.pgm";
  o.overlay_path = out_prefix;
  o.overlay_path += "_overlay.ppm";
  write_pgm_labels(o.label_path, o.labels);

  Image8 overlay = tensor_to_image(x);
  for (Index p = 0; p < o.labels.size(); ++p) {
    const auto col = palette_color(o.labels.data[static_cast<std::size_t>(p)]);
    for (int ch = 0; ch < 3; ++ch) {
      auto& px = overlay.data[static_cast<std::size_t>(p * 3 + ch)];
      px = static_cast<std::uint8_t>((px + col[static_cast<std::size_t>(ch)] + 1) / 2);
    }
  }
  write_netpbm(o.overlay_path, overlay);
  return o;
}

// analyze -------------------------------------------------------------------

std::string format_plan(const PlannedArch& plan) {
  std::ostringstream os;
  os << "# output stride " << plan.output_stride << "\n";
  os << "block,nominal_stride,effective_stride,input_rate,rate,nominal_os,effective_os\n";
  for (const auto& b : plan.blocks) {
    os << b.name << ',' << b.nominal_stride << ',' << b.effective_stride << ',' << b.input_rate << ','
       << b.rate << ',' << b.nominal_cumulative << ',' << b.effective_cumulative << '\n';
  }
  os << "aspp_rates";
  for (int r : aspp_rates_at(plan.spec, plan.output_stride)) os << ',' << r;
  os << '\n';
  if (plan.conv2_block >= 0) os << "conv2_tap," << plan.blocks[static_cast<std::size_t>(plan.conv2_block)].name << '\n';
  if (plan.conv3_block >= 0) os << "conv3_tap," << plan.blocks[static_cast<std::size_t>(plan.conv3_block)].name << '\n';
  return os.str();
}

AnalyzeOutcome cmd_analyze(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const PlannedArch plan = plan_output_stride(cfg.arch(), cfg.eval_output_stride());
  AnalyzeOutcome o;
  o.cost = count_multiply_adds(plan, Shape{1, cfg.arch().input_channels, cfg.data.side, cfg.data.side});
  std::ostringstream os;
  os << format_plan(plan);
  os << "# input " << cfg.data.side << "x" << cfg.data.side << "\n";
  for (const char* section : {"backbone", "aspp", "decoder", "head"}) {
    os << "multiply_adds_" << section << ',' << o.cost.section_total(section) << '\n';
  }
  os << "multiply_adds_total," << o.cost.total << '\n';
  o.plan_text = os.str();
  if (!out_dir.empty()) {
    write_text(out_dir / "plan.txt", o.plan_text);
    write_text(out_dir / "cost.csv", o.cost.to_csv());
  }
  return o;
}

// ablate --------------------------------------------------------------------

AblationAxis parse_ablation_axis(const std::string& s) {
  if (s == "reduce_channels") return AblationAxis::reduce_channels;
  if (s == "decoder_structure") return AblationAxis::decoder_structure;
  if (s == "os_matrix") return AblationAxis::os_matrix;
  if (s == "sc") return AblationAxis::sc;
  throw ConfigError("unknown ablation axis '" + s +
                    "' (expected reduce_channels, decoder_structure, os_matrix or sc)");
}

const char* to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::reduce_channels: return "reduce_channels";
    case AblationAxis::decoder_structure: return "decoder_structure";
    case AblationAxis::os_matrix: return "os_matrix";
    case AblationAxis::sc: return "sc";
  }
  return "?";
}

std::vector<double> default_ms_scales() { return {0.5, 0.75, 1.0, 1.25, 1.5, 1.75}; }

namespace {

struct AblationContext {
  const RunConfig& base;
  std::vector<Sample> train;
  std::vector<Sample> eval;
  std::ostream* progress;
};

Model train_variant(AblationContext& ctx, const RunConfig& cfg, const std::string& label) {
  cfg.validate();
  if (ctx.progress) *ctx.progress << "training " << label << "\n";
  Model model{cfg.arch(), init_params(cfg.arch(), cfg.train.seed)};
  train_model(model, ctx.train, cfg);
  return model;
}

EvalResult eval_variant(AblationContext& ctx, Model& model, int eval_os, bool ms, bool flip) {
  EvalOptions opt;
  opt.output_stride = eval_os;
  opt.scales = ms ? (ctx.base.eval.ms_scales.size() > 1 ? ctx.base.eval.ms_scales : default_ms_scales())
                  : std::vector<double>{1.0};
  opt.flip = flip;
  opt.trimap_widths = ctx.base.eval.trimap_widths;
  return evaluate(model, ctx.eval, opt);
}

const char* yes_no(bool b) { return b ? "yes" : "no"; }

std::string mark_best(const std::vector<std::string>& rows, const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) out += rows[i] + (i == best ? ",*" : ",") + "\n";
  return out;
}

std::string structure_label(const std::vector<DecoderConv>& s) {
  // Identical convs collapse to "[kxk,f]xN".
  bool same = true;
  for (const auto& d : s) same = same && d == s.front();
  const auto one = [](const DecoderConv& d) {
    return "[" + std::to_string(d.kernel) + "x" + std::to_string(d.kernel) + " " + std::to_string(d.filters) + "]";
  };
  if (same) return one(s.front()) + (s.size() > 1 ? "x" + std::to_string(s.size()) : "");
  std::string out;
  for (const auto& d : s) out += one(d);
  return out;
}

std::string ablate_reduce_channels(AblationContext& ctx) {
  const int f = ctx.base.model.encoder_channels;
  std::vector<std::string> rows;
  std::vector<double> scores;
  for (int c : {8, 16, 32, 48, 64}) {
    RunConfig cfg = ctx.base;
    cfg.model.decoder_enabled = true;
    cfg.model.decoder_reduce_channels = c;
    cfg.model.decoder_structure = {{3, f}};
    cfg.model.decoder_taps = LowLevelTaps::conv2;
    Model m = train_variant(ctx, cfg, "reduce_channels=" + std::to_string(c));
    const double score = eval_variant(ctx, m, cfg.model.output_stride, false, false).iou.mean;
    rows.push_back(std::to_string(c) + "," + shortest(score));
    scores.push_back(score);
  }
  return "channels,miou,best\n" + mark_best(rows, scores);
}

std::string ablate_decoder_structure(AblationContext& ctx) {
  const int f = ctx.base.model.encoder_channels;
  struct Row {
    bool conv3;
    std::vector<DecoderConv> structure;
  };
  const std::vector<Row> table = {
      {false, {{3, f}}},
      {false, {{3, f}, {3, f}}},
      {false, {{3, f}, {3, f}, {3, f}}},
      {false, {{3, f / 2}}},
      {false, {{1, f}}},
      {true, {{3, f}}},
  };
  std::vector<std::string> rows;
  std::vector<double> scores;
  for (const Row& t : table) {
    RunConfig cfg = ctx.base;
    cfg.model.decoder_enabled = true;
    cfg.model.decoder_structure = t.structure;
    cfg.model.decoder_taps = t.conv3 ? LowLevelTaps::conv2_conv3 : LowLevelTaps::conv2;
    const std::string label = structure_label(t.structure);
    Model m = train_variant(ctx, cfg, "decoder " + label + (t.conv3 ? " conv2+conv3" : " conv2"));
    const double score = eval_variant(ctx, m, cfg.model.output_stride, false, false).iou.mean;
    rows.push_back(std::string("yes,") + yes_no(t.conv3) + "," + label + "," + shortest(score));
    scores.push_back(score);
  }
  return "conv2,conv3,structure,miou,best\n" + mark_best(rows, scores);
}

struct InferenceRow {
  int eval_os;
  bool ms;
  bool flip;
};

std::string ablate_os_matrix(AblationContext& ctx) {
  struct Block {
    int train_os;
    bool decoder;
    std::vector<InferenceRow> rows;
  };
  const std::vector<Block> blocks = {
      {16, false, {{16, false, false}, {8, false, false}, {8, true, false}, {8, true, true}}},
      {16, true,
       {{16, false, false}, {16, true, false}, {16, true, true}, {8, false, false}, {8, true, false},
        {8, true, true}}},
      {32, false, {{32, false, false}}},
      {32, true, {{32, false, false}, {16, false, false}, {8, false, false}}},
  };
  std::string out = "train_os,eval_os,decoder,ms,flip,miou,multiply_adds\n";
  for (const Block& b : blocks) {
    RunConfig cfg = ctx.base;
    cfg.model.output_stride = b.train_os;
    cfg.model.decoder_enabled = b.decoder;
    Model m = train_variant(ctx, cfg,
                            "train_os=" + std::to_string(b.train_os) + " decoder=" + yes_no(b.decoder));
    for (const InferenceRow& r : b.rows) {
      const EvalResult e = eval_variant(ctx, m, r.eval_os, r.ms, r.flip);
      out += std::to_string(b.train_os) + "," + std::to_string(r.eval_os) + "," + yes_no(b.decoder) + "," +
             yes_no(r.ms) + "," + yes_no(r.flip) + "," + shortest(e.iou.mean) + "," +
             std::to_string(e.multiply_adds) + "\n";
    }
  }
  return out;
}

std::string ablate_sc(AblationContext& ctx) {
  const std::vector<InferenceRow> rows = {
      {16, false, false}, {16, true, true}, {8, false, false}, {8, true, true}};
  std::string out = "train_os,eval_os,decoder,ms,flip,sc,miou,multiply_adds\n";
  for (bool sc : {false, true}) {
    RunConfig cfg = ctx.base;
    cfg.model.output_stride = 16;
    cfg.model.decoder_enabled = true;
    cfg.model.separable_heads = sc;
    Model m = train_variant(ctx, cfg, std::string("sc=") + yes_no(sc));
    for (const InferenceRow& r : rows) {
      const EvalResult e = eval_variant(ctx, m, r.eval_os, r.ms, r.flip);
      out += "16," + std::to_string(r.eval_os) + ",yes," + yes_no(r.ms) + "," + yes_no(r.flip) + "," +
             yes_no(sc) + "," + shortest(e.iou.mean) + "," + std::to_string(e.multiply_adds) + "\n";
    }
  }
  return out;
}

}  // namespace

std::string cmd_ablate(const RunConfig& cfg, AblationAxis axis, const fs::path& out_dir,
                       std::ostream* progress) {
  cfg.validate();
  AblationContext ctx{cfg, load_train_split(cfg), load_eval_split(cfg), progress};
  std::string table;
  switch (axis) {
    case AblationAxis::reduce_channels: table = ablate_reduce_channels(ctx); break;
    case AblationAxis::decoder_structure: table = ablate_decoder_structure(ctx); break;
    case AblationAxis::os_matrix: table = ablate_os_matrix(ctx); break;
    case AblationAxis::sc: table = ablate_sc(ctx); break;
  }
  if (!out_dir.empty()) write_text(out_dir / (std::string("ablate_") + to_string(axis) + ".csv"), table);
  return table;
}

// gendata -------------------------------------------------------------------

DatasetManifest cmd_gendata(const fs::path& out_dir, Index count, Index side, int num_classes,
                            std::uint64_t seed, Index first) {
  return write_dataset(out_dir, gen_shapes_dataset(count, side, num_classes, seed, first), num_classes);
}

}  // namespace aseg
