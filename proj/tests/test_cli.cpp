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

// Drives the seg executable end to end.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aseg/netpbm.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "aseg_test_cli";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run seg(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt";
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string(SEG_BINARY) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Tiny model and dataset so each command finishes in a second or two.
fs::path tiny_config() {
  const fs::path p = kWork / "tiny.cfg";
  fs::create_directories(kWork);
  std::ofstream(p) << "# tiny run\n"
                      "model.stem_channels = 4\n"
                      "model.stage_channels = 4,6,8\n"
                      "model.units_per_stage = 1\n"
                      "model.num_classes = 3\n"
                      "aspp.channels = 8\n"
                      "decoder.reduce_channels = 4\n"
                      "decoder.structure = 3x8\n"
                      "train.max_iter = 4\n"
                      "train.batch = 2\n"
                      "train.crop = 32\n"
                      "train.checkpoint_every = 2\n"
                      "data.side = 32\n"
                      "data.train_count = 6\n"
                      "data.eval_count = 3\n";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(seg("").code == 1);
  CHECK(seg("frobnicate").code == 1);
  CHECK(seg("ablate --out " + (kWork / "x").string()).code == 1);
}

TEST_CASE("unknown config keys exit 2 and name the key") {
  const Run r = seg("analyze --set decoder.bogus_key=1 --out " + (kWork / "a0").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("decoder.bogus_key") != std::string::npos);

  const fs::path cfg = kWork / "bad.cfg";
  std::ofstream(cfg) << "model.num_classes = 4\nmodel.depth = 3\n";
  const Run f = seg("analyze --config " + cfg.string() + " --out " + (kWork / "a1").string());
  CHECK(f.code == 2);
  CHECK(f.err.find("model.depth") != std::string::npos);
  CHECK(seg("analyze --set model.output_stride=12 --out " + (kWork / "a2").string()).code == 2);
}

TEST_CASE("missing inputs exit 3") {
  CHECK(seg("eval --checkpoint " + (kWork / "nope.ckpt").string()).code == 3);
  CHECK(seg("analyze --config " + (kWork / "nope.cfg").string()).code == 2);
}

TEST_CASE("analyze writes a deterministic plan and cost report") {
  const fs::path a = kWork / "an1", b = kWork / "an2";
  REQUIRE(seg("analyze --eval-os 8 --out " + a.string()).code == 0);
  REQUIRE(seg("analyze --eval-os 8 --out " + b.string()).code == 0);
  CHECK(slurp(a / "plan.txt") == slurp(b / "plan.txt"));
  CHECK(slurp(a / "cost.csv") == slurp(b / "cost.csv"));
  const std::string plan = slurp(a / "plan.txt");
  CHECK(plan.find("stage2,2,1,1,2,16,8") != std::string::npos);
  CHECK(plan.find("stage3,2,1,2,4,32,8") != std::string::npos);
  CHECK(plan.find("aspp_rates,12,24,36") != std::string::npos);
}

TEST_CASE("train, eval and infer on a tiny configuration") {
  const fs::path cfg = tiny_config();
  const fs::path run1 = kWork / "run1", run2 = kWork / "run2";
  fs::remove_all(run1);
  fs::remove_all(run2);
  REQUIRE(seg("train --config " + cfg.string() + " --out " + run1.string()).code == 0);
  REQUIRE(seg("train --config " + cfg.string() + " --out " + run2.string()).code == 0);
  CHECK(slurp(run1 / "loss_log.csv") == slurp(run2 / "loss_log.csv"));
  CHECK(slurp(run1 / "checkpoint.ckpt") == slurp(run2 / "checkpoint.ckpt"));
  CHECK(slurp(run1 / "loss_log.csv").starts_with("iter,lr,loss\n1,0.007,"));

  const Run e1 = seg("eval --config " + cfg.string() + " --out " + run1.string());
  const Run e2 = seg("eval --config " + cfg.string() + " --out " + run2.string());
  REQUIRE(e1.code == 0);
  CHECK(e1.out == e2.out);
  CHECK(slurp(run1 / "metrics.csv") == e1.out);
  CHECK(e1.out.find("trimap_9,") != std::string::npos);

  const Run flip = seg("eval --config " + cfg.string() + " --flip --out " + (kWork / "flip").string() +
                       " --checkpoint " + (run1 / "checkpoint.ckpt").string());
  REQUIRE(flip.code == 0);
  const auto madds = [](const std::string& csv) {
    const auto at = csv.find("multiply_adds,");
    return std::stoll(csv.substr(at + 14));
  };
  CHECK(madds(flip.out) == 2 * madds(e1.out));

  const fs::path img = kWork / "probe.ppm";
  aseg::write_ppm(img, aseg::Tensor::constant({1, 3, 40, 36}, 0.5));
  const Run inf = seg("infer --image " + img.string() + " --out " + run1.string());
  REQUIRE(inf.code == 0);
  const aseg::LabelMap labels = aseg::read_pgm_labels(run1 / "probe_labels.pgm");
  CHECK(labels.h == 40);
  CHECK(labels.w == 36);
  const aseg::Tensor overlay = aseg::read_ppm(run1 / "probe_overlay.ppm");
  CHECK(overlay.shape() == aseg::Shape{1, 3, 40, 36});

  aseg::write_ppm(kWork / "tiny.ppm", aseg::Tensor::constant({1, 3, 8, 8}, 0.5));
  CHECK(seg("infer --image " + (kWork / "tiny.ppm").string() + " --out " + run1.string()).code == 3);
  CHECK(seg("eval --config " + cfg.string() + " --eval-os 64 --out " + run1.string()).code == 2);
}

TEST_CASE("resume continues at the stored iteration") {
  const fs::path cfg = tiny_config();
  const fs::path full = kWork / "full", part = kWork / "part";
  fs::remove_all(full);
  fs::remove_all(part);
  REQUIRE(seg("train --config " + cfg.string() + " --out " + full.string()).code == 0);
  REQUIRE(seg("train --config " + cfg.string() + " --set train.max_iter=2 --out " + part.string()).code == 0);
  REQUIRE(seg("train --config " + cfg.string() + " --resume --out " + part.string()).code == 0);
  const std::string a = slurp(full / "loss_log.csv");
  const std::string b = slurp(part / "loss_log.csv");
  const auto row = [](const std::string& log, int i) {
    std::istringstream in(log);
    std::string line;
    for (int k = 0; k <= i; ++k) std::getline(in, line);
    return line;
  };
  const auto loss_of = [&](const std::string& log, int i) {
    const std::string r = row(log, i);
    return r.substr(r.rfind(',') + 1);
  };
  const auto iter_lr_of = [&](const std::string& log, int i) {
    const std::string r = row(log, i);
    return r.substr(0, r.rfind(','));
  };
  CHECK(std::count(b.begin(), b.end(), '\n') == 5);
  // The short run uses its own schedule, so only the first loss matches.
  CHECK(loss_of(a, 1) == loss_of(b, 1));
  CHECK(iter_lr_of(a, 3) == iter_lr_of(b, 3));
  CHECK(iter_lr_of(a, 4) == iter_lr_of(b, 4));
  CHECK(row(b, 3).starts_with("3,"));
}

TEST_CASE("diverging training exits 4") {
  const fs::path cfg = tiny_config();
  const Run r = seg("train --config " + cfg.string() + " --set train.base_lr=1e150 --set train.max_iter=30 --out " +
                    (kWork / "boom").string());
  CHECK(r.code == 4);
  CHECK(r.err.find("non-finite") != std::string::npos);
  CHECK(fs::exists(kWork / "boom" / "loss_log.csv"));
}

TEST_CASE("perfect prediction directories score one") {
  const fs::path cfg = tiny_config();
  const fs::path data = kWork / "gen";
  fs::remove_all(data);
  REQUIRE(seg("gendata --out " + data.string() + " --count 3 --side 32 --classes 3 --first 6").code == 0);
  const Run r = seg("eval --config " + cfg.string() + " --predictions " + (data / "labels").string() +
                    " --out " + (kWork / "pred").string());
  REQUIRE(r.code == 0);
  CHECK(r.out.starts_with("metric,value\nmiou,1\n"));
}
