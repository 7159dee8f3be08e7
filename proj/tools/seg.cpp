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

// seg: train / eval / infer / analyze / ablate / gendata.
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 data error, 4 numeric
// failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aseg/commands.hpp"

namespace {

using namespace aseg;

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> eval_os;
  std::string ms;
  bool flip = false;
  std::string trimap;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string image;
  std::string axis;
  std::string predictions;
  bool resume = false;
  Index count = 250;
  Index side = 64;
  int classes = 4;
  Index first = 0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Run config file (key = value)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Override train.seed");
  cmd->add_option("--set", o.sets, "Override one config key, KEY=VALUE (repeatable)");
}

void add_eval_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--eval-os", o.eval_os, "Evaluation output stride");
  cmd->add_option("--ms", o.ms, "Comma-separated inference scales");
  cmd->add_flag("--flip", o.flip, "Add left-right flipped inputs");
  cmd->add_option("--trimap", o.trimap, "Comma-separated trimap band widths");
}

RunConfig file_config(const Options& o) { return o.config.empty() ? RunConfig{} : load_config(o.config); }

void apply_overrides(RunConfig& cfg, const Options& o) {
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.eval_os) cfg.eval.output_stride = *o.eval_os;
  if (!o.ms.empty()) set_config_value(cfg, "eval.ms_scales", o.ms);
  if (o.flip) cfg.eval.flip = true;
  if (!o.trimap.empty()) set_config_value(cfg, "eval.trimap_widths", o.trimap);
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.ckpt" : fs::path(o.checkpoint);
}

// Model sections from the checkpoint, eval and data sections from --config.
RunConfig eval_config(const Checkpoint& ckpt, const Options& o) {
  RunConfig cfg = ckpt.config;
  if (!o.config.empty()) {
    const RunConfig file = load_config(o.config);
    cfg.eval = file.eval;
    cfg.data = file.data;
  }
  apply_overrides(cfg, o);
  return cfg;
}

void print_eval(const EvalResult& r) {
  std::cout << format_eval_csv(r);
}

int run(int argc, char** argv) {
  CLI::App app{"Encoder-decoder semantic segmentation toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, o);
  train->add_flag("--resume", o.resume, "Resume from the checkpoint in --out (or --checkpoint)");
  train->add_option("--checkpoint", o.checkpoint, "Checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or a prediction directory");
  add_common(eval, o);
  add_eval_flags(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default OUT/checkpoint.ckpt)");
  eval->add_option("--predictions", o.predictions, "Score label maps in this directory instead");

  auto* infer = app.add_subcommand("infer", "Label one PPM image");
  add_common(infer, o);
  add_eval_flags(infer, o);
  infer->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default OUT/checkpoint.ckpt)");
  infer->add_option("--image", o.image, "Input P6 image")->required();

  auto* analyze = app.add_subcommand("analyze", "Dump the output-stride plan and Multiply-Adds");
  add_common(analyze, o);
  add_eval_flags(analyze, o);

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate one ablation table");
  add_common(ablate, o);
  add_eval_flags(ablate, o);
  ablate->add_option("--axis", o.axis, "reduce_channels | decoder_structure | os_matrix | sc")->required();

  auto* gendata = app.add_subcommand("gendata", "Write the synthetic shapes dataset");
  gendata->add_option("--out", o.out, "Output directory")->required();
  gendata->add_option("--count", o.count, "Number of images");
  gendata->add_option("--side", o.side, "Image side in pixels");
  gendata->add_option("--classes", o.classes, "Number of classes including background");
  gendata->add_option("--seed", o.seed, "Generator seed (default 7)");
  gendata->add_option("--first", o.first, "Index of the first image in the seeded stream");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) {
      RunConfig cfg = file_config(o);
      apply_overrides(cfg, o);
      std::optional<fs::path> resume;
      if (o.resume || !o.checkpoint.empty()) resume = checkpoint_path(o);
      cmd_train(cfg, o.out, resume, &std::cerr);
    } else if (eval->parsed()) {
      if (!o.predictions.empty()) {
        RunConfig cfg = file_config(o);
        apply_overrides(cfg, o);
        print_eval(cmd_eval_predictions(o.predictions, cfg, o.out));
      } else {
        const Checkpoint ckpt = load_checkpoint(checkpoint_path(o));
        print_eval(cmd_eval(ckpt, eval_config(ckpt, o), o.out));
      }
    } else if (infer->parsed()) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path(o));
      const fs::path prefix = fs::path(o.out) / fs::path(o.image).stem();
      const InferOutcome r = cmd_infer(ckpt, eval_config(ckpt, o), o.image, prefix);
      std::cout << r.label_path.string() << "\n" << r.overlay_path.string() << "\n";
    } else if (analyze->parsed()) {
      RunConfig cfg = file_config(o);
      apply_overrides(cfg, o);
      const AnalyzeOutcome r = cmd_analyze(cfg, o.out);
      std::cout << r.plan_text;
    } else if (ablate->parsed()) {
      RunConfig cfg = file_config(o);
      apply_overrides(cfg, o);
      std::cout << cmd_ablate(cfg, parse_ablation_axis(o.axis), o.out, &std::cerr);
    } else if (gendata->parsed()) {
      const DatasetManifest m = cmd_gendata(o.out, o.count, o.side, o.classes, o.seed.value_or(7), o.first);
      std::cout << (fs::path(o.out) / "manifest.tsv").string() << " (" << m.entries.size() << " images)\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PlanError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
