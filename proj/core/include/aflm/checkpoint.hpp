// Copyright 2026 The aflm Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aflm/model.hpp"
#include "aflm/training.hpp"

namespace aflm {

inline constexpr std::uint32_t kCheckpointMajor = 1;
inline constexpr std::uint32_t kCheckpointMinor = 0;

struct CheckpointManifest {
  std::uint32_t format_major = kCheckpointMajor;
  std::uint32_t format_minor = kCheckpointMinor;
  ModelConfig model;
  std::string tokenizer_hash;
  std::string tokenizer_file;  // relative to the checkpoint's directory
  Stage stage = Stage::pretrain;
  std::int64_t step = 0;
  std::int64_t reset_count = 0;
  std::string rng_state;
  std::string schedule_json;  // echo of the producing schedule
  std::uint64_t seed = 0;
  std::string variant;  // "baseline" or "active_forgetting"
  std::string arm;      // "Baseline", "BA", "AFA" once finetuned
  std::vector<std::string> lineage;  // stages applied so far, oldest first

  bool operator==(const CheckpointManifest&) const = default;
};

struct Checkpoint {
  CheckpointManifest manifest;
  ModelParameters params;
  std::optional<OptimizerState> optimizer;
};

// Layout: "AFLMCKPT", u32 major, u32 minor, u64 manifest length, manifest
// JSON, u32 manifest crc; u32 tensor count, then per tensor u32 name
// length, name, u32 ndim, u64 dims, little-endian f32 data, u32 crc; u8
// optimizer flag (then i64 t and the m and v tensors); u32 crc of
// everything before it.
std::string serialize_checkpoint(const Checkpoint& checkpoint);

// Throws IntegrityError (with the byte offset) on corruption, VersionError
// on an unknown major version, TokenizerMismatchError when
// expected_tokenizer_hash differs from the manifest.
Checkpoint deserialize_checkpoint(std::string_view bytes,
                                  const std::optional<std::string>& expected_tokenizer_hash = {});

// Writes through a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_tokenizer_hash = {});

std::uint32_t crc32_of(std::string_view bytes) noexcept;

}  // namespace aflm
