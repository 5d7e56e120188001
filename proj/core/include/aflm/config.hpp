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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aflm/evaluation.hpp"
#include "aflm/model.hpp"
#include "aflm/training.hpp"

namespace aflm {

enum class Variant { baseline, active_forgetting };
std::string_view to_string(Variant variant) noexcept;
Variant parse_variant(std::string_view name);

struct TokenizerSettings {
  std::size_t base_size = 512;
  // Target size of the adapting tokenizer is 260 + adapt_budget.
  std::size_t adapt_budget = 128;
};

struct EvalSettings {
  std::size_t max_blocks = 32;  // held-out blocks per language
  IsotropyConfig isotropy;
  bool translation = true;
  std::size_t n_shots = 4;
  std::size_t max_queries = 8;
  std::size_t max_new_tokens = 32;
  double bleu_smoothing = 0.0;
};

struct ChatSettings {
  std::optional<std::filesystem::path> data;  // JSONL {"system","user","assistant"}
  double epochs = 5.0;
};

struct PipelineConfig {
  std::filesystem::path corpus_manifest;
  TokenizerSettings tokenizer;
  std::string model_preset = "small";
  ModelConfig model = ModelConfig::preset("small");
  TrainingSchedule pretrain = TrainingSchedule::desk_pretraining();
  TrainingSchedule adapt;
  TrainingSchedule finetune;
  ChatSettings chat;
  EvalSettings eval;
  Variant variant = Variant::active_forgetting;
  std::filesystem::path output_dir = "runs/default";
  std::uint64_t seed = 0;
  bool save_optimizer = true;

  PipelineConfig();

  // Every violation, empty when valid.
  std::vector<std::string> problems() const;
  // Throws ConfigError listing every violation at once.
  void validate() const;

  // Relative paths resolve against base_dir. Unknown keys and type errors
  // are collected and reported together as a ConfigError.
  static PipelineConfig parse(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_json() const;
};

std::string schedule_to_json(const TrainingSchedule& schedule);
TrainingSchedule schedule_from_json(std::string_view text);
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace aflm
