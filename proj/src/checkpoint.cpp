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

#include "aseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "aseg/model.hpp"
#include "aseg/netpbm.hpp"

namespace aseg {

namespace {

constexpr std::string_view kMagic = "ASEGCKPT";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}

  void need(std::size_t n, const char* what) const {
    if (end_ - pos_ < n) {
      throw DataError(std::string("checkpoint truncated reading ") + what + " at byte offset " +
                      std::to_string(pos_));
    }
  }
  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>("parameter values")); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.le<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = format_config(ckpt.config);
  w.le<std::uint64_t>(cfg.size());
  w.bytes(cfg.data(), cfg.size());
  w.le<std::uint64_t>(static_cast<std::uint64_t>(ckpt.iteration));
  w.le<std::uint64_t>(ckpt.params.size());
  for (const auto& [name, e] : ckpt.params) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    const Shape s = e.value.shape();
    for (Index d : {s.n, s.c, s.h, s.w}) w.le<std::uint64_t>(static_cast<std::uint64_t>(d));
    for (Index i = 0; i < e.value.size(); ++i) w.f64(e.value.data()[i]);
  }
  const std::uint64_t sum = fnv1a64(w.out().data(), w.out().size());
  w.le<std::uint64_t>(sum);
  return std::move(w.out());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (std::size_t i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != fnv1a64(bytes.data(), body)) throw DataError("checkpoint checksum mismatch");

  Reader r(bytes, body);
  r.str(kMagic.size(), "magic");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto cfg_len = r.le<std::uint64_t>("config length");
  try {
    ckpt.config = parse_config(r.str(cfg_len, "config"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  ckpt.iteration = static_cast<std::int64_t>(r.le<std::uint64_t>("iteration"));
  const auto count = r.le<std::uint64_t>("parameter count");

  ckpt.params = init_params(ckpt.config.arch(), 0);
  if (count != ckpt.params.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " parameters, architecture needs " +
                    std::to_string(ckpt.params.size()));
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.le<std::uint32_t>("parameter name length");
    const std::string name = r.str(len, "parameter name");
    if (!ckpt.params.contains(name)) throw DataError("checkpoint parameter '" + name + "' not in architecture");
    ParamEntry& e = ckpt.params.at(name);
    Shape s;
    s.n = static_cast<Index>(r.le<std::uint64_t>("shape"));
    s.c = static_cast<Index>(r.le<std::uint64_t>("shape"));
    s.h = static_cast<Index>(r.le<std::uint64_t>("shape"));
    s.w = static_cast<Index>(r.le<std::uint64_t>("shape"));
    if (!(s == e.value.shape())) {
      throw DataError("checkpoint parameter '" + name + "' has shape " + s.str() + ", expected " +
                      e.value.shape().str());
    }
    r.need(static_cast<std::size_t>(s.count()) * 8, "parameter values");
    for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = r.f64();
  }
  if (r.pos() != body) throw DataError("checkpoint has trailing bytes before the checksum");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, encode_checkpoint(ckpt));
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace aseg
