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

#ifndef ASEG_DATASET_HPP
#define ASEG_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aseg/label_map.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

struct Sample {
  Tensor image;  // (1, 3, h, w), values in [0, 1]
  LabelMap label;
};

/// Deterministic 64-bit seed derived from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Synthetic shapes ----------------------------------------------------------

/// Shape drawn for each foreground class: 1 rectangle, 2 disk, 3 triangle,
/// 4 diamond, 5 cross. Class 0 is background.
inline constexpr int kMaxShapeClasses = 6;

const char* shape_class_name(int class_id);

/// Image `index` of the stream defined by `seed`. Generating n images yields
/// the first n of any longer generation with the same seed.
Sample gen_shapes_sample(std::uint64_t seed, std::uint64_t index, Index side, int num_classes);

/// Images [first, first + n) of the stream.
std::vector<Sample> gen_shapes_dataset(Index n, Index side, int num_classes, std::uint64_t seed,
                                       Index first = 0);

// Manifest ------------------------------------------------------------------

struct DatasetManifest {
  std::filesystem::path root;  // directory the entries are relative to
  std::vector<std::pair<std::string, std::string>> entries;  // (image, label)
  int num_classes = 0;
  int void_index = kVoid;
};

/// Text form: '#' comment lines (metadata as "# key=value"), then one
/// "image<TAB>label" pair per line.
std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root);

/// Reads a manifest and checks that every listed file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

std::vector<Sample> load_samples(const DatasetManifest& m);

/// Writes images/NNNN.ppm, labels/NNNN.pgm and manifest.tsv under `dir`.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                              int num_classes);

// Augmentation --------------------------------------------------------------

struct AugmentOptions {
  Index crop = 64;
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  double hflip_prob = 0.5;

  void validate() const;
};

/// Nearest-neighbour label resize on the align-corners grid.
LabelMap resize_labels_nearest(const LabelMap& labels, Index out_h, Index out_w);

/// Random scale (bilinear image, nearest label), random crop padded with the
/// per-channel image mean and VOID labels, then a random left-right flip.
Sample augment(const Sample& s, const AugmentOptions& opt, std::uint64_t seed);

}  // namespace aseg

#endif  // ASEG_DATASET_HPP
