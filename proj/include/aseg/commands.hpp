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

// Subcommand implementations behind the `seg` executable. Each writes its
// outputs under an output directory and returns what it wrote, so the same
// code paths can be driven in-process.

#ifndef ASEG_COMMANDS_HPP
#define ASEG_COMMANDS_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aseg/checkpoint.hpp"
#include "aseg/config.hpp"
#include "aseg/cost.hpp"
#include "aseg/trainer.hpp"

namespace aseg {

namespace fs = std::filesystem;

/// Exit codes of the executable.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

struct TrainOutcome {
  Model model;
  std::vector<TrainLogRow> log;
  std::int64_t iteration = 0;
};

/// Trains from scratch, or from `resume` at its stored iteration. Writes
/// config.txt, loss_log.csv and checkpoint.ckpt (every checkpoint_every steps
/// and at the end). On a numeric failure the loss log is flushed, the last
/// checkpoint is left in place and the NumericError is rethrown.
TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& out_dir,
                       const std::optional<fs::path>& resume = std::nullopt,
                       std::ostream* progress = nullptr);

/// Evaluates a checkpoint on the configured held-out split and writes
/// metrics.csv. The model architecture comes from the checkpoint; eval.* and
/// data.* come from `cfg`.
EvalResult cmd_eval(const Checkpoint& ckpt, const RunConfig& cfg, const fs::path& out_dir);

/// Scores a directory of label maps named like the held-out split's labels
/// (NNNN.pgm for the synthetic split) and writes metrics.csv.
EvalResult cmd_eval_predictions(const fs::path& predictions, const RunConfig& cfg,
                                const fs::path& out_dir);

/// Fixed palette used for overlays: class k gets the colour of the bit
/// interleaving of k across the R, G, B high bits (0 is black); void is white.
std::array<std::uint8_t, 3> palette_color(ClassId k);

struct InferOutcome {
  LabelMap labels;
  fs::path label_path;    // <prefix>_labels.pgm
  fs::path overlay_path;  // <prefix>_overlay.ppm
};

InferOutcome cmd_infer(const Checkpoint& ckpt, const RunConfig& cfg, const fs::path& image,
                       const fs::path& out_prefix);

/// Plan dump plus per-layer cost CSV for the configured architecture at the
/// evaluation output stride and a data.side x data.side input. Writes
/// plan.txt and cost.csv when `out_dir` is non-empty; returns both texts.
struct AnalyzeOutcome {
  std::string plan_text;
  CostReport cost;
};
AnalyzeOutcome cmd_analyze(const RunConfig& cfg, const fs::path& out_dir = {});

std::string format_plan(const PlannedArch& plan);

/// Ablation axes mirroring the decoder and inference-strategy tables.
enum class AblationAxis { reduce_channels, decoder_structure, os_matrix, sc };
AblationAxis parse_ablation_axis(const std::string& s);
const char* to_string(AblationAxis axis);

/// Multi-scale set used by the MS rows when eval.ms_scales has one entry.
std::vector<double> default_ms_scales();

/// Trains and evaluates every row of the axis with the budget in `cfg.train`
/// and writes ablate_<axis>.csv. Single-metric tables carry a `best` column
/// marking the arg-max row.
std::string cmd_ablate(const RunConfig& cfg, AblationAxis axis, const fs::path& out_dir,
                       std::ostream* progress = nullptr);

/// Writes the synthetic shapes images [first, first + count) as a dataset.
DatasetManifest cmd_gendata(const fs::path& out_dir, Index count, Index side, int num_classes,
                            std::uint64_t seed, Index first = 0);

}  // namespace aseg

#endif  // ASEG_COMMANDS_HPP
