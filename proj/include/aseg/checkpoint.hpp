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

// Checkpoint layout, all integers little-endian:
//
//   "ASEGCKPT"                          8 bytes
//   version                             u32
//   config length, config text          u64, bytes (format_config output)
//   iteration                           u64
//   parameter count                     u64
//   per parameter, in name order:
//     name length, name                 u32, bytes
//     n, c, h, w                        4 x u64
//     values                            n*c*h*w x IEEE-754 binary64
//   FNV-1a 64 of every preceding byte   u64

#ifndef ASEG_CHECKPOINT_HPP
#define ASEG_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aseg/config.hpp"
#include "aseg/param_store.hpp"

namespace aseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  std::int64_t iteration = 0;
  ParamStore params;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Validates magic, version, checksum and that parameter names and shapes
/// match the stored config's architecture. Errors are DataError.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aseg

#endif  // ASEG_CHECKPOINT_HPP
