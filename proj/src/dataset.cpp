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

#include "aseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "aseg/netpbm.hpp"

namespace aseg {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* shape_class_name(int class_id) {
  switch (class_id) {
    case 0: return "background";
    case 1: return "rectangle";
    case 2: return "disk";
    case 3: return "triangle";
    case 4: return "diamond";
    case 5: return "cross";
    default: return "unknown";
  }
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct ShapeInstance {
  int cls = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  int orientation = 0;
  double color[3] = {0, 0, 0};
};

// Sign of the edge function for the triangle test.
double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool inside(const ShapeInstance& s, double px, double py) {
  // Pixel centres; coordinates relative to the shape centre.
  double u = px - s.cx, v = py - s.cy;
  switch (s.cls) {
    case 1:
      return std::abs(u) <= s.rx && std::abs(v) <= s.ry;
    case 2:
      return u * u + v * v <= s.rx * s.rx;
    case 3: {
      // Isosceles triangle pointing up, rotated by orientation * 90 degrees.
      for (int k = 0; k < s.orientation; ++k) {
        const double t = u;
        u = v;
        v = -t;
      }
      const double r = s.rx;
      const double d0 = edge(0, -r, -r, r, u, v);
      const double d1 = edge(-r, r, r, r, u, v);
      const double d2 = edge(r, r, 0, -r, u, v);
      return (d0 <= 0 && d1 <= 0 && d2 <= 0) || (d0 >= 0 && d1 >= 0 && d2 >= 0);
    }
    case 4:
      return std::abs(u) / s.rx + std::abs(v) / s.ry <= 1.0;
    case 5: {
      const double arm = s.rx * 0.38;
      return (std::abs(u) <= s.rx && std::abs(v) <= arm) || (std::abs(v) <= s.rx && std::abs(u) <= arm);
    }
    default:
      return false;
  }
}

}  // namespace

Sample gen_shapes_sample(std::uint64_t seed, std::uint64_t index, Index side, int num_classes) {
  if (num_classes < 2 || num_classes > kMaxShapeClasses) {
    throw ConfigError("shapes dataset supports 2.." + std::to_string(kMaxShapeClasses) +
                      " classes, got " + std::to_string(num_classes));
  }
  if (side < 32) throw ConfigError("shapes dataset side must be >= 32");
  Rng rng(derive_seed(seed, index));
  const double s = static_cast<double>(side);

  // Background: base colour, linear gradient, sinusoidal texture.
  double base[3];
  for (double& b : base) b = uniform(rng, 0.2, 0.8);
  const double gdir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gamp = uniform(rng, 0.0, 0.15);
  const double tfreq = uniform(rng, 0.2, 0.8);
  const double tdir = uniform(rng, 0.0, std::numbers::pi);
  const double tamp = uniform(rng, 0.0, 0.06);

  std::vector<ShapeInstance> shapes;
  for (int cls = 1; cls < num_classes; ++cls) {
    if (uniform(rng, 0.0, 1.0) >= 0.9) continue;
    ShapeInstance inst;
    inst.cls = cls;
    inst.rx = uniform(rng, 0.09 * s, 0.2 * s);
    inst.ry = cls == 1 || cls == 4 ? inst.rx * uniform(rng, 0.6, 1.0) : inst.rx;
    if (cls == 1 && uniform(rng, 0.0, 1.0) < 0.5) std::swap(inst.rx, inst.ry);
    inst.cx = uniform(rng, inst.rx, s - inst.rx);
    inst.cy = uniform(rng, inst.ry, s - inst.ry);
    inst.orientation = static_cast<int>(std::uniform_int_distribution<int>(0, 3)(rng));
    double dist = 0.0;
    do {
      dist = 0.0;
      for (int c = 0; c < 3; ++c) {
        inst.color[c] = uniform(rng, 0.0, 1.0);
        dist = std::max(dist, std::abs(inst.color[c] - base[c]));
      }
    } while (dist < 0.3);
    shapes.push_back(inst);
  }
  std::shuffle(shapes.begin(), shapes.end(), rng);

  Sample out;
  out.image = Tensor(Shape{1, 3, side, side});
  out.label = LabelMap(side, side, 0);
  std::vector<int> instance(static_cast<std::size_t>(side * side), 0);
  std::uniform_real_distribution<double> noise(-0.03, 0.03);
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      int top = -1;
      for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (inside(shapes[i], px, py)) top = static_cast<int>(i);
      }
      const double g = gamp * ((px * std::cos(gdir) + py * std::sin(gdir)) / s - 0.5);
      const double t = tamp * std::sin(tfreq * (px * std::cos(tdir) + py * std::sin(tdir)));
      for (int c = 0; c < 3; ++c) {
        const double v = top >= 0 ? shapes[static_cast<std::size_t>(top)].color[c] : base[c] + g + t;
        out.image(0, c, y, x) = std::clamp(v + noise(rng), 0.0, 1.0);
      }
      if (top >= 0) {
        out.label(y, x) = static_cast<ClassId>(shapes[static_cast<std::size_t>(top)].cls);
        instance[static_cast<std::size_t>(y * side + x)] = top + 1;
      }
    }
  }

  // One-pixel void ring on the inner boundary of every instance.
  LabelMap ringed = out.label;
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) {
      const int id = instance[static_cast<std::size_t>(y * side + x)];
      if (id == 0) continue;
      const Index ny[4] = {y - 1, y + 1, y, y};
      const Index nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= side || nx[k] < 0 || nx[k] >= side) continue;
        if (instance[static_cast<std::size_t>(ny[k] * side + nx[k])] != id) {
          ringed(y, x) = kVoid;
          break;
        }
      }
    }
  }
  out.label = std::move(ringed);
  return out;
}

std::vector<Sample> gen_shapes_dataset(Index n, Index side, int num_classes, std::uint64_t seed,
                                       Index first) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    out.push_back(gen_shapes_sample(seed, static_cast<std::uint64_t>(first + i), side, num_classes));
  }
  return out;
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "# aseg dataset manifest\n";
  os << "# num_classes=" << m.num_classes << "\n";
  os << "# void=" << m.void_index << "\n";
  for (const auto& [img, lab] : m.entries) os << img << '\t' << lab << '\n';
  return os.str();
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root) {
  DatasetManifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      try {
        if (key == "num_classes") m.num_classes = std::stoi(value);
        if (key == "void") m.void_index = std::stoi(value);
      } catch (const std::exception&) {
        throw DataError("manifest line " + std::to_string(lineno) + ": bad value for " + key);
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw DataError("manifest line " + std::to_string(lineno) + ": expected image<TAB>label");
    }
    m.entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = parse_manifest(ss.str(), path.parent_path());
  for (const auto& [img, lab] : m.entries) {
    for (const auto& rel : {img, lab}) {
      if (!std::filesystem::exists(m.root / rel)) {
        throw DataError("manifest '" + path.string() + "' lists missing file '" + rel + "'");
      }
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const std::string text = format_manifest(m);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<Sample> load_samples(const DatasetManifest& m) {
  std::vector<Sample> out;
  for (const auto& [img, lab] : m.entries) {
    Sample s;
    s.image = read_ppm(m.root / img);
    s.label = read_pgm_labels(m.root / lab);
    if (s.label.h != s.image.h() || s.label.w != s.image.w()) {
      throw DataError("'" + img + "' and '" + lab + "' differ in size");
    }
    if (m.num_classes > 0) validate_labels(s.label, m.num_classes);
    out.push_back(std::move(s));
  }
  return out;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                              int num_classes) {
  DatasetManifest m;
  m.root = dir;
  m.num_classes = num_classes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%04zu", i);
    const std::string img = std::string("images/") + stem + ".ppm";
    const std::string lab = std::string("labels/") + stem + ".pgm";
    write_ppm(dir / img, samples[i].image);
    write_pgm_labels(dir / lab, samples[i].label);
    m.entries.emplace_back(img, lab);
  }
  save_manifest(dir / "manifest.tsv", m);
  return m;
}

void AugmentOptions::validate() const {
  if (crop < 1) throw ConfigError("augment: crop must be >= 1");
  if (!(scale_lo >= 0.25 && scale_lo <= scale_hi && scale_hi <= 4.0)) {
    throw ConfigError("augment: scale range must satisfy 0.25 <= lo <= hi <= 4");
  }
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("augment: hflip_prob must be in [0,1]");
}

LabelMap resize_labels_nearest(const LabelMap& labels, Index out_h, Index out_w) {
  if (out_h == labels.h && out_w == labels.w) return labels;
  const auto src = [](Index dst, Index in, Index out) -> Index {
    if (out == 1) return 0;
    return static_cast<Index>(std::lround(static_cast<double>(dst) * static_cast<double>(in - 1) /
                                          static_cast<double>(out - 1)));
  };
  LabelMap out(out_h, out_w);
  for (Index y = 0; y < out_h; ++y) {
    const Index sy = src(y, labels.h, out_h);
    for (Index x = 0; x < out_w; ++x) out(y, x) = labels(sy, src(x, labels.w, out_w));
  }
  return out;
}

Sample augment(const Sample& s, const AugmentOptions& opt, std::uint64_t seed) {
  opt.validate();
  Rng rng(seed);
  const double scale = opt.scale_lo == opt.scale_hi ? opt.scale_lo : uniform(rng, opt.scale_lo, opt.scale_hi);
  const auto extent = [&](Index v) {
    return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(v) * scale)));
  };
  const Index h = extent(s.image.h()), w = extent(s.image.w());
  Tensor img = bilinear_resize(s.image, h, w);
  LabelMap lab = resize_labels_nearest(s.label, h, w);

  const Index ph = std::max(h, opt.crop), pw = std::max(w, opt.crop);
  const Index oy = std::uniform_int_distribution<Index>(0, ph - opt.crop)(rng);
  const Index ox = std::uniform_int_distribution<Index>(0, pw - opt.crop)(rng);
  const bool flip = uniform(rng, 0.0, 1.0) < opt.hflip_prob;

  Sample out;
  out.image = Tensor(Shape{1, img.c(), opt.crop, opt.crop});
  out.label = LabelMap(opt.crop, opt.crop, kVoid);
  for (Index c = 0; c < img.c(); ++c) {
    const double mean = img.sample(0).row(c).mean();
    for (Index y = 0; y < opt.crop; ++y) {
      for (Index x = 0; x < opt.crop; ++x) {
        const Index sy = y + oy, sx = x + ox;
        const Index dx = flip ? opt.crop - 1 - x : x;
        const bool in = sy < h && sx < w;
        out.image(0, c, y, dx) = in ? img(0, c, sy, sx) : mean;
        if (c == 0 && in) out.label(y, dx) = lab(sy, sx);
      }
    }
  }
  return out;
}

}  // namespace aseg
