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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aflm/model.hpp"
#include "aflm/random.hpp"
#include "aflm/tokenizer.hpp"

namespace aflm {

// Which parameters a training stage may not touch.
struct FreezeSpec {
  bool trunk_frozen = false;
  std::vector<TokenId> frozen_embedding_rows;  // sorted, unique
  bool head_frozen = false;

  // Trunk and embedding rows [0, base_vocab_size) frozen, head trainable.
  static FreezeSpec adaptation(std::size_t base_vocab_size);
  static FreezeSpec everything(std::size_t vocab_size);

  bool row_frozen(TokenId id) const noexcept;
  bool operator==(const FreezeSpec&) const = default;
};

struct TrainingSchedule {
  double peak_lr = 3e-4;
  std::int64_t total_steps = 2000;
  double warmup_frac = 0.1;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  // Active forgetting: re-draw the token embeddings every k steps.
  std::optional<std::int64_t> reset_interval;
  FreezeSpec freeze;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Also re-draw the LM head at each reset.
  bool reset_lm_head = false;
  // Zero the Adam moments of re-drawn tensors.
  bool reset_optimizer_state = true;
  // Global-norm gradient clipping; off unless set.
  std::optional<double> grad_clip_norm;
  std::int64_t log_interval = 10;

  std::int64_t warmup_steps() const;
  // Throws ConfigError.
  void validate() const;

  // 150k steps, lr 1e-4, batch 128, 10% linear warmup, cosine, wd 0, k 10k.
  static TrainingSchedule full_scale_pretraining();
  // lr 1e-6, batch 16, 10% warmup, cosine, wd 0.
  static TrainingSchedule full_scale_finetuning();
  // 2000 steps, k 200, batch 16, lr 3e-4.
  static TrainingSchedule desk_pretraining();
};

struct OptimizerState {
  std::vector<Matrix<float>> m;  // parallel to ModelParameters::tensors()
  std::vector<Matrix<float>> v;
  std::int64_t t = 0;

  static OptimizerState zeros_like(const ModelParameters& params);
  bool operator==(const OptimizerState&) const = default;
};

// Linear warmup 0 -> peak over warmup_steps(), then cosine decay to 0 at
// total_steps.
double lr_at(const TrainingSchedule& schedule, std::int64_t step);

// One decoupled-weight-decay Adam update with bias correction. Parameters
// covered by schedule.freeze are skipped entirely (no decay, no moment
// update). Throws NumericError, leaving everything untouched, if any
// gradient is NaN or infinite.
void adamw_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& opt,
                double lr, const TrainingSchedule& schedule);

// `step` counts completed optimizer steps (1-based). Never true at the
// final step.
bool should_reset(const TrainingSchedule& schedule, std::int64_t step);

std::uint64_t embedding_reset_seed(std::uint64_t seed, std::int64_t reset_count) noexcept;
std::uint64_t head_reset_seed(std::uint64_t seed, std::int64_t reset_count) noexcept;

struct ResetOptions {
  bool reset_lm_head = false;
  bool reset_optimizer_state = true;
};

// Re-draws the token embeddings from Normal(0, init_std^2) seeded by
// (seed, reset_count), then increments reset_count.
void active_forget_reset(ModelParameters& params, OptimizerState& opt, std::uint64_t seed,
                         std::int64_t& reset_count, const ResetOptions& options = {});

void apply_freeze_mask(ModelParameters& grads, const FreezeSpec& freeze);

struct ChatExample {
  std::string system;
  std::string user;
  std::string assistant;
};

struct TrainingSequence {
  std::vector<TokenId> ids;
  TargetMask mask;
};

// The exact text a chat example serializes to.
std::string chat_serialization(const ChatExample& example);

// Marker tokens are emitted as special IDs; only assistant content and the
// closing marker are targets. An empty assistant yields an inference prompt
// ending right after "<|im_start|>assistant\n".
TrainingSequence format_chat_example(const TokenizerModel& tokenizer, const ChatExample& example);

enum class Stage { pretrain, adapt, finetune };
std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view name);

struct TrainingState {
  ModelParameters params;
  OptimizerState optimizer;
  std::int64_t step = 0;
  std::int64_t reset_count = 0;
  Rng rng;  // batch sampling

  static TrainingState fresh(ModelParameters params, std::uint64_t seed);
};

struct LogRecord {
  Stage stage = Stage::pretrain;
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::int64_t reset_count = 0;
};

struct StageHooks {
  std::function<void(const LogRecord&)> on_log;
  // Receives copies of the state right before and right after a reset.
  std::function<void(std::int64_t step, const TrainingState& before,
                     const TrainingState& after)>
      on_reset;
  // Called with the last good state before a NumericError is thrown.
  std::function<void(const TrainingState&)> on_divergence;
};

// Trains from state.step up to schedule.total_steps. Each step samples
// batch_size sequences (with replacement) using state.rng, averages the NLL
// over all targets in the batch, masks frozen gradients, and takes an AdamW
// step at lr_at(step + 1). Pretraining additionally applies active
// forgetting resets when the schedule has a reset interval.
TrainingState run_stage(Stage stage, TrainingState state,
                        std::span<const TrainingSequence> data,
                        const TrainingSchedule& schedule, const StageHooks& hooks = {});

// Wraps packed blocks as sequences with every position a target.
std::vector<TrainingSequence> sequences_from_blocks(
    const std::vector<std::vector<TokenId>>& blocks);

}  // namespace aflm
