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

#include <filesystem>

#include "aseg/checkpoint.hpp"
#include "aseg/config.hpp"
#include "aseg/model.hpp"
#include "aseg/netpbm.hpp"

using namespace aseg;
namespace fs = std::filesystem;

namespace {

Checkpoint small_checkpoint() {
  Checkpoint c;
  c.config.model.backbone.stem_channels = 4;
  c.config.model.backbone.stage_channels = {4, 6, 8};
  c.config.model.backbone.units_per_stage = 1;
  c.config.model.encoder_channels = 8;
  c.config.model.decoder_reduce_channels = 4;
  c.config.model.decoder_structure = {{3, 8}};
  c.iteration = 42;
  c.params = init_params(c.config.arch(), 9);
  return c;
}

}  // namespace

TEST_CASE("config text round trips through every key") {
  RunConfig cfg;
  cfg.model.output_stride = 8;
  cfg.model.decoder_structure = {{3, 128}, {1, 64}};
  cfg.model.decoder_taps = LowLevelTaps::conv2_conv3;
  cfg.eval.ms_scales = {0.5, 1.0, 1.75};
  cfg.train.base_lr = 0.0123;
  cfg.data.train_manifest = "some/where.tsv";
  const std::string text = format_config(cfg);
  const RunConfig back = parse_config(text);
  CHECK(format_config(back) == text);
  for (const std::string& key : config_keys()) {
    CHECK(get_config_value(back, key) == get_config_value(cfg, key));
    CHECK(text.find(key + " = ") != std::string::npos);
  }
}

TEST_CASE("config parsing handles comments and rejects unknown keys") {
  const RunConfig cfg = parse_config("# comment\n\ndecoder.reduce_channels = 32   # trailing\naspp.rates = 4,8\n");
  CHECK(cfg.model.decoder_reduce_channels == 32);
  CHECK(cfg.model.aspp_rates == std::vector<int>{4, 8});
  try {
    parse_config("decoder.reduce_chanels = 32\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("decoder.reduce_chanels") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("model.num_classes = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("decoder.structure = 3by256\n"), ConfigError);
}

TEST_CASE("arch mapping follows the model section") {
  RunConfig cfg;
  cfg.model.separable_heads = true;
  cfg.model.decoder_enabled = false;
  cfg.model.num_classes = 5;
  const ArchSpec a = cfg.arch();
  CHECK(a.separable_heads);
  CHECK_FALSE(a.decoder_enabled);
  CHECK(a.num_classes == 5);
  CHECK(a.target_output_stride == 16);
  CHECK(cfg.eval_output_stride() == 16);
  cfg.eval.output_stride = 8;
  CHECK(cfg.eval_output_stride() == 8);
}

TEST_CASE("checkpoint save, load, save is byte identical") {
  const fs::path dir = fs::temp_directory_path() / "aseg_test_ckpt";
  fs::remove_all(dir);
  const Checkpoint c = small_checkpoint();
  save_checkpoint(dir / "a.ckpt", c);
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.iteration == 42);
  CHECK(format_config(back.config) == format_config(c.config));
  save_checkpoint(dir / "b.ckpt", back);
  CHECK(read_file_bytes(dir / "a.ckpt") == read_file_bytes(dir / "b.ckpt"));
  for (const auto& [name, e] : c.params) CHECK(back.params.at(name).value.vec() == e.value.vec());
  CHECK(encode_checkpoint(back) == encode_checkpoint(c));
}

TEST_CASE("checkpoint layout starts with magic and version") {
  const auto bytes = encode_checkpoint(small_checkpoint());
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "ASEGCKPT");
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  CHECK(stored == fnv1a64(bytes.data(), bytes.size() - 8));
}

TEST_CASE("corrupted checkpoints are rejected") {
  const auto good = encode_checkpoint(small_checkpoint());
  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped), DataError);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
  CHECK_THROWS_AS(decode_checkpoint(std::vector<std::uint8_t>(good.begin(), good.begin() + 20)), DataError);

  Checkpoint mismatched = small_checkpoint();
  mismatched.config.model.encoder_channels = 16;
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(mismatched)), DataError);
  CHECK(fnv1a64(reinterpret_cast<const std::uint8_t*>("a"), 1) == 0xaf63dc4c8601ec8cULL);
}
