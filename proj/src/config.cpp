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

#include "aseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace aseg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + s + "' is not a valid number");
  }
  return v;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Per-type text codecs.
template <typename T>
struct Codec;

template <>
struct Codec<int> {
  static int parse(const std::string& s) { return parse_number<int>(s); }
  static std::string format(int v) { return format_number(v); }
};
template <>
struct Codec<std::int64_t> {
  static std::int64_t parse(const std::string& s) { return parse_number<std::int64_t>(s); }
  static std::string format(std::int64_t v) { return format_number(v); }
};
template <>
struct Codec<std::uint64_t> {
  static std::uint64_t parse(const std::string& s) { return parse_number<std::uint64_t>(s); }
  static std::string format(std::uint64_t v) { return format_number(v); }
};
template <>
struct Codec<double> {
  static double parse(const std::string& s) { return parse_number<double>(s); }
  static std::string format(double v) { return format_number(v); }
};
template <>
struct Codec<bool> {
  static bool parse(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("'" + s + "' is not a boolean (true/false)");
  }
  static std::string format(bool v) { return v ? "true" : "false"; }
};
template <>
struct Codec<std::string> {
  static std::string parse(const std::string& s) { return s; }
  static std::string format(const std::string& v) { return v; }
};
template <typename T>
struct Codec<std::vector<T>> {
  static std::vector<T> parse(const std::string& s) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(Codec<T>::parse(part));
    return out;
  }
  static std::string format(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i > 0) out += ',';
      out += Codec<T>::format(v[i]);
    }
    return out;
  }
};
template <>
struct Codec<DecoderConv> {
  static DecoderConv parse(const std::string& s) {
    const auto parts = split(s, 'x');
    if (parts.size() != 2) throw ConfigError("decoder conv '" + s + "' must look like 3x256");
    return DecoderConv{parse_number<int>(parts[0]), parse_number<int>(parts[1])};
  }
  static std::string format(const DecoderConv& d) {
    return format_number(d.kernel) + "x" + format_number(d.filters);
  }
};
template <>
struct Codec<LowLevelTaps> {
  static LowLevelTaps parse(const std::string& s) {
    if (s == "conv2") return LowLevelTaps::conv2;
    if (s == "conv2+conv3") return LowLevelTaps::conv2_conv3;
    throw ConfigError("decoder taps must be 'conv2' or 'conv2+conv3', got '" + s + "'");
  }
  static std::string format(LowLevelTaps t) { return t == LowLevelTaps::conv2 ? "conv2" : "conv2+conv3"; }
};
template <>
struct Codec<BackboneKind> {
  static BackboneKind parse(const std::string& s) {
    if (s == "xception") return BackboneKind::xception;
    if (s == "residual") return BackboneKind::residual;
    throw ConfigError("backbone must be 'xception' or 'residual', got '" + s + "'");
  }
  static std::string format(BackboneKind k) { return k == BackboneKind::xception ? "xception" : "residual"; }
};

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Field field(std::string key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  return Field{std::move(key),
               [access](RunConfig& c, const std::string& v) { access(c) = Codec<T>::parse(v); },
               [access](const RunConfig& c) {
                 return Codec<T>::format(access(const_cast<RunConfig&>(c)));
               }};
}

#define ASEG_FIELD(key, member) field(key, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      ASEG_FIELD("model.backbone", model.backbone.kind),
      ASEG_FIELD("model.stem_channels", model.backbone.stem_channels),
      ASEG_FIELD("model.stage_channels", model.backbone.stage_channels),
      ASEG_FIELD("model.units_per_stage", model.backbone.units_per_stage),
      ASEG_FIELD("model.deep", model.backbone.deep),
      ASEG_FIELD("model.num_classes", model.num_classes),
      ASEG_FIELD("model.output_stride", model.output_stride),
      ASEG_FIELD("model.separable_heads", model.separable_heads),
      ASEG_FIELD("model.pointwise_bn_relu", model.pointwise_bn_relu),
      ASEG_FIELD("aspp.rates", model.aspp_rates),
      ASEG_FIELD("aspp.image_level", model.aspp_image_level),
      ASEG_FIELD("aspp.channels", model.encoder_channels),
      ASEG_FIELD("decoder.enabled", model.decoder_enabled),
      ASEG_FIELD("decoder.reduce_channels", model.decoder_reduce_channels),
      ASEG_FIELD("decoder.structure", model.decoder_structure),
      ASEG_FIELD("decoder.taps", model.decoder_taps),
      ASEG_FIELD("bn.epsilon", model.bn_epsilon),
      ASEG_FIELD("bn.momentum", model.bn_momentum),
      ASEG_FIELD("bn.frozen", model.bn_frozen),
      ASEG_FIELD("train.base_lr", train.base_lr),
      ASEG_FIELD("train.power", train.power),
      ASEG_FIELD("train.momentum", train.momentum),
      ASEG_FIELD("train.weight_decay", train.weight_decay),
      ASEG_FIELD("train.max_iter", train.max_iter),
      ASEG_FIELD("train.batch", train.batch),
      ASEG_FIELD("train.crop", train.crop),
      ASEG_FIELD("train.scale_min", train.scale_min),
      ASEG_FIELD("train.scale_max", train.scale_max),
      ASEG_FIELD("train.hflip_prob", train.hflip_prob),
      ASEG_FIELD("train.seed", train.seed),
      ASEG_FIELD("train.checkpoint_every", train.checkpoint_every),
      ASEG_FIELD("eval.output_stride", eval.output_stride),
      ASEG_FIELD("eval.ms_scales", eval.ms_scales),
      ASEG_FIELD("eval.flip", eval.flip),
      ASEG_FIELD("eval.trimap_widths", eval.trimap_widths),
      ASEG_FIELD("data.train_manifest", data.train_manifest),
      ASEG_FIELD("data.eval_manifest", data.eval_manifest),
      ASEG_FIELD("data.side", data.side),
      ASEG_FIELD("data.train_count", data.train_count),
      ASEG_FIELD("data.eval_count", data.eval_count),
      ASEG_FIELD("data.seed", data.seed),
  };
  return all;
}

#undef ASEG_FIELD

const Field& find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

ArchSpec RunConfig::arch() const {
  ArchSpec spec = make_toy_spec(model.backbone);
  spec.num_classes = model.num_classes;
  spec.target_output_stride = model.output_stride;
  spec.aspp_rates = model.aspp_rates;
  spec.aspp_image_level = model.aspp_image_level;
  spec.encoder_channels = model.encoder_channels;
  spec.decoder_enabled = model.decoder_enabled;
  spec.decoder_reduce_channels = model.decoder_reduce_channels;
  spec.decoder_conv_structure = model.decoder_structure;
  spec.decoder_low_level_taps = model.decoder_taps;
  spec.separable_heads = model.separable_heads;
  spec.pointwise_bn_relu = model.pointwise_bn_relu;
  spec.bn_epsilon = model.bn_epsilon;
  spec.bn_momentum = model.bn_momentum;
  spec.bn_frozen = model.bn_frozen;
  return spec;
}

PolySchedule RunConfig::schedule() const {
  return PolySchedule{train.base_lr, train.power, train.max_iter};
}

AugmentOptions RunConfig::augment() const {
  return AugmentOptions{train.crop, train.scale_min, train.scale_max, train.hflip_prob};
}

void RunConfig::validate() const {
  const ArchSpec spec = arch();
  spec.validate();
  plan_output_stride(spec);
  if (eval.output_stride != 0) plan_output_stride(spec, eval.output_stride);
  schedule().validate();
  augment().validate();
  if (!(train.momentum >= 0.0 && train.momentum < 1.0)) throw ConfigError("train.momentum must be in [0,1)");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (train.batch < 1) throw ConfigError("train.batch must be >= 1");
  if (train.checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
  if (eval.ms_scales.empty()) throw ConfigError("eval.ms_scales must be non-empty");
  for (double s : eval.ms_scales) {
    if (!(s > 0.0)) throw ConfigError("eval.ms_scales entries must be > 0");
  }
  for (int w : eval.trimap_widths) {
    if (w < 0) throw ConfigError("eval.trimap_widths entries must be >= 0");
  }
  if (train.crop < model.output_stride) throw ConfigError("train.crop must be >= model.output_stride");
  if (data.train_count < 0 || data.eval_count < 0) throw ConfigError("data counts must be >= 0");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  try {
    f.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return find_field(key).get(cfg);
}

RunConfig parse_config(const std::string& text, const RunConfig& defaults) {
  RunConfig cfg = defaults;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace aseg
