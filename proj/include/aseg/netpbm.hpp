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

// Binary netpbm: P6 (RGB) for images, P5 (gray) for label maps. Only maxval
// 255 is accepted. Header whitespace may contain '#' comments.

#ifndef ASEG_NETPBM_HPP
#define ASEG_NETPBM_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aseg/label_map.hpp"
#include "aseg/tensor.hpp"

namespace aseg {

struct Image8 {
  Index h = 0;
  Index w = 0;
  int channels = 3;  // 3 for P6, 1 for P5
  std::vector<std::uint8_t> data;  // interleaved, row-major
};

/// Parses an in-memory P5/P6 file. Errors are DataError with the byte offset.
Image8 decode_netpbm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_netpbm(const Image8& img);

Image8 read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Image8& img);

/// (1, 3, h, w) tensor with values in [0, 1].
Tensor image_to_tensor(const Image8& img);
/// Rounds to the nearest 8-bit level after clamping to [0, 1].
Image8 tensor_to_image(const Tensor& t, Index n = 0);

Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& t, Index n = 0);
LabelMap read_pgm_labels(const std::filesystem::path& path);
void write_pgm_labels(const std::filesystem::path& path, const LabelMap& labels);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace aseg

#endif  // ASEG_NETPBM_HPP
