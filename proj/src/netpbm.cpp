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

#include "aseg/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace aseg {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }

  [[noreturn]] void fail_at(const std::string& what, std::size_t pos) const {
    throw DataError("netpbm: " + what + " at byte offset " + std::to_string(pos));
  }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = static_cast<char>(b_[pos_]);
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        return;
      }
    }
  }

  Index integer(const char* field) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) fail(std::string("unexpected end of header reading ") + field);
    if (b_[pos_] < '0' || b_[pos_] > '9') fail(std::string("expected decimal ") + field);
    token_ = pos_;
    Index v = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + (b_[pos_] - '0');
      if (v > (Index{1} << 30)) fail(std::string(field) + " too large");
      ++pos_;
    }
    return v;
  }

  void single_whitespace() {
    if (pos_ >= b_.size()) fail("unexpected end of header");
    const char c = static_cast<char>(b_[pos_]);
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r') fail("expected whitespace after maxval");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::size_t token() const { return token_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
  std::size_t token_ = 0;
};

}  // namespace

Image8 decode_netpbm(const std::vector<std::uint8_t>& bytes) {
  HeaderReader r(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    r.fail("bad magic (expected P5 or P6)");
  }
  Image8 img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  r.advance(2);
  img.w = r.integer("width");
  if (img.w < 1) r.fail_at("zero image width", r.token());
  img.h = r.integer("height");
  if (img.h < 1) r.fail_at("zero image height", r.token());
  const Index maxval = r.integer("maxval");
  if (maxval != 255) r.fail_at("unsupported maxval " + std::to_string(maxval), r.token());
  r.single_whitespace();
  const auto need = static_cast<std::size_t>(img.w * img.h * img.channels);
  if (bytes.size() - r.pos() < need) {
    r.fail("truncated raster (need " + std::to_string(need) + " bytes, have " +
           std::to_string(bytes.size() - r.pos()) + ")");
  }
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()),
                  bytes.begin() + static_cast<std::ptrdiff_t>(r.pos() + need));
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw DataError("netpbm: channels must be 1 or 3");
  if (img.data.size() != static_cast<std::size_t>(img.h * img.w * img.channels)) {
    throw DataError("netpbm: raster size does not match dimensions");
  }
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Image8 read_netpbm(const std::filesystem::path& path) {
  try {
    return decode_netpbm(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_netpbm(const std::filesystem::path& path, const Image8& img) {
  write_file_bytes(path, encode_netpbm(img));
}

Tensor image_to_tensor(const Image8& img) {
  Tensor t(Shape{1, img.channels, img.h, img.w});
  for (Index y = 0; y < img.h; ++y) {
    for (Index x = 0; x < img.w; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        t(0, c, y, x) = img.data[static_cast<std::size_t>((y * img.w + x) * img.channels + c)] / 255.0;
      }
    }
  }
  return t;
}

Image8 tensor_to_image(const Tensor& t, Index n) {
  if (t.c() != 3 && t.c() != 1) throw ShapeError("tensor_to_image: need 1 or 3 channels, got " + t.shape().str());
  Image8 img;
  img.h = t.h();
  img.w = t.w();
  img.channels = static_cast<int>(t.c());
  img.data.resize(static_cast<std::size_t>(img.h * img.w * img.channels));
  for (Index y = 0; y < img.h; ++y) {
    for (Index x = 0; x < img.w; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(t(n, c, y, x), 0.0, 1.0);
        img.data[static_cast<std::size_t>((y * img.w + x) * img.channels + c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

Tensor read_ppm(const std::filesystem::path& path) {
  const Image8 img = read_netpbm(path);
  if (img.channels != 3) throw DataError(path.string() + ": expected a P6 image");
  return image_to_tensor(img);
}

void write_ppm(const std::filesystem::path& path, const Tensor& t, Index n) {
  write_netpbm(path, tensor_to_image(t, n));
}

LabelMap read_pgm_labels(const std::filesystem::path& path) {
  Image8 img = read_netpbm(path);
  if (img.channels != 1) throw DataError(path.string() + ": expected a P5 label map");
  LabelMap labels;
  labels.h = img.h;
  labels.w = img.w;
  labels.data = std::move(img.data);
  return labels;
}

void write_pgm_labels(const std::filesystem::path& path, const LabelMap& labels) {
  Image8 img;
  img.h = labels.h;
  img.w = labels.w;
  img.channels = 1;
  img.data = labels.data;
  write_netpbm(path, img);
}

}  // namespace aseg
