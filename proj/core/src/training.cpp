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


#include "aflm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aflm/errors.hpp"

namespace aflm {

FreezeSpec FreezeSpec::adaptation(std::size_t base_vocab_size) {
  FreezeSpec spec;
  spec.trunk_frozen = true;
  spec.frozen_embedding_rows.resize(base_vocab_size);
  for (std::size_t i = 0; i < base_vocab_size; ++i) {
    spec.frozen_embedding_rows[i] = static_cast<TokenId>(i);
  }
  return spec;
}

FreezeSpec FreezeSpec::everything(std::size_t vocab_size) {
  FreezeSpec spec = adaptation(vocab_size);
  spec.head_frozen = true;
  return spec;
}

bool FreezeSpec::row_frozen(TokenId id) const noexcept {
  return std::binary_search(frozen_embedding_rows.begin(), frozen_embedding_rows.end(), id);
}

std::int64_t TrainingSchedule::warmup_steps() const {
  // The epsilon keeps products like 0.1 * 2000 from rounding up a step.
  return static_cast<std::int64_t>(
      std::ceil(warmup_frac * static_cast<double>(total_steps) - 1e-9));
}

void TrainingSchedule::validate() const {
  std::vector<std::string> problems;
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) problems.push_back("warmup_frac must be in [0, 1)");
  if (total_steps < 1) problems.push_back("total_steps must be >= 1");
  if (reset_interval && *reset_interval < 1) problems.push_back("reset_interval must be >= 1");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) problems.push_back("peak_lr must be >= 0");
  if (!(weight_decay >= 0.0)) problems.push_back("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    problems.push_back("betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) problems.push_back("epsilon must be > 0");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) problems.push_back("grad_clip_norm must be > 0");
  if (log_interval < 1) problems.push_back("log_interval must be >= 1");
  if (!std::is_sorted(freeze.frozen_embedding_rows.begin(), freeze.frozen_embedding_rows.end()) ||
      std::adjacent_find(freeze.frozen_embedding_rows.begin(),
                         freeze.frozen_embedding_rows.end()) != freeze.frozen_embedding_rows.end()) {
    problems.push_back("frozen_embedding_rows must be sorted and unique");
  }
  if (!problems.empty()) {
    std::string msg = "invalid training schedule:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

TrainingSchedule TrainingSchedule::full_scale_pretraining() {
  TrainingSchedule s;
  s.peak_lr = 1e-4;
  s.total_steps = 150000;
  s.warmup_frac = 0.1;
  s.batch_size = 128;
  s.weight_decay = 0.0;
  s.reset_interval = 10000;
  return s;
}

TrainingSchedule TrainingSchedule::full_scale_finetuning() {
  TrainingSchedule s;
  s.peak_lr = 1e-6;
  s.warmup_frac = 0.1;
  s.batch_size = 16;
  s.weight_decay = 0.0;
  return s;
}

TrainingSchedule TrainingSchedule::desk_pretraining() {
  TrainingSchedule s;
  s.peak_lr = 3e-4;
  s.total_steps = 2000;
  s.batch_size = 16;
  s.reset_interval = 200;
  return s;
}

OptimizerState OptimizerState::zeros_like(const ModelParameters& params) {
  OptimizerState st;
  for (const auto& t : params.tensors()) {
    st.m.emplace_back(t.tensor->rows, t.tensor->cols);
    st.v.emplace_back(t.tensor->rows, t.tensor->cols);
  }
  return st;
}

double lr_at(const TrainingSchedule& schedule, std::int64_t step) {
  const std::int64_t total = schedule.total_steps;
  const std::int64_t warmup = schedule.warmup_steps();
  if (step <= 0 || step >= total) return 0.0;
  if (step < warmup) {
    return schedule.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return schedule.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

bool group_frozen(ParamGroup group, const FreezeSpec& freeze) {
  switch (group) {
    case ParamGroup::trunk: return freeze.trunk_frozen;
    case ParamGroup::head: return freeze.head_frozen;
    case ParamGroup::embedding: return false;
  }
  return false;
}

}  // namespace

void adamw_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& opt,
                double lr, const TrainingSchedule& schedule) {
  auto p_refs = params.tensors();
  const auto g_refs = grads.tensors();
  if (g_refs.size() != p_refs.size()) throw ConfigError("gradient layout does not match parameters");
  if (opt.m.empty() && opt.v.empty() && opt.t == 0) opt = OptimizerState::zeros_like(params);
  if (opt.m.size() != p_refs.size() || opt.v.size() != p_refs.size()) {
    throw ConfigError("optimizer state layout does not match parameters");
  }
  for (std::size_t i = 0; i < p_refs.size(); ++i) {
    if (!p_refs[i].tensor->same_shape(*g_refs[i].tensor) || !p_refs[i].tensor->same_shape(opt.m[i]) ||
        !p_refs[i].tensor->same_shape(opt.v[i])) {
      throw ConfigError("shape mismatch in tensor " + p_refs[i].name);
    }
    for (const float g : g_refs[i].tensor->data) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in tensor " + p_refs[i].name);
    }
  }
  if (lr < 0.0) throw ConfigError("learning rate must be >= 0");

  opt.t += 1;
  const double t = static_cast<double>(opt.t);
  const float b1 = static_cast<float>(schedule.beta1);
  const float b2 = static_cast<float>(schedule.beta2);
  // 1 - beta formed in double; in float 1 - 0.999f is off by 1e-5 relative.
  const float one_minus_b1 = static_cast<float>(1.0 - schedule.beta1);
  const float one_minus_b2 = static_cast<float>(1.0 - schedule.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(schedule.beta1, t));
  const float bc2 = static_cast<float>(1.0 - std::pow(schedule.beta2, t));
  const float eps = static_cast<float>(schedule.epsilon);
  const float step = static_cast<float>(lr);
  const float decay = static_cast<float>(1.0 - lr * schedule.weight_decay);
  const bool use_decay = schedule.weight_decay != 0.0;

  auto update_range = [&](std::size_t ti, std::size_t begin, std::size_t end) {
    float* p = p_refs[ti].tensor->data.data();
    const float* g = g_refs[ti].tensor->data.data();
    float* m = opt.m[ti].data.data();
    float* v = opt.v[ti].data.data();
    for (std::size_t k = begin; k < end; ++k) {
      m[k] = b1 * m[k] + one_minus_b1 * g[k];
      v[k] = b2 * v[k] + one_minus_b2 * g[k] * g[k];
      if (use_decay) p[k] *= decay;
      const float m_hat = m[k] / bc1;
      const float v_hat = v[k] / bc2;
      p[k] -= step * m_hat / (std::sqrt(v_hat) + eps);
    }
  };

  for (std::size_t ti = 0; ti < p_refs.size(); ++ti) {
    const auto group = p_refs[ti].group;
    if (group_frozen(group, schedule.freeze)) continue;
    const auto& tensor = *p_refs[ti].tensor;
    if (group == ParamGroup::embedding && !schedule.freeze.frozen_embedding_rows.empty()) {
      for (std::size_t r = 0; r < tensor.rows; ++r) {
        if (schedule.freeze.row_frozen(static_cast<TokenId>(r))) continue;
        update_range(ti, r * tensor.cols, (r + 1) * tensor.cols);
      }
    } else {
      update_range(ti, 0, tensor.size());
    }
  }
}

bool should_reset(const TrainingSchedule& schedule, std::int64_t step) {
  if (!schedule.reset_interval || *schedule.reset_interval < 1 || step < 1) return false;
  return step % *schedule.reset_interval == 0 && step < schedule.total_steps;
}

std::uint64_t embedding_reset_seed(std::uint64_t seed, std::int64_t reset_count) noexcept {
  return mix_seed(mix_seed(seed, 0x7265736574ULL), static_cast<std::uint64_t>(reset_count));
}

std::uint64_t head_reset_seed(std::uint64_t seed, std::int64_t reset_count) noexcept {
  return mix_seed(mix_seed(seed, 0x68656164ULL), static_cast<std::uint64_t>(reset_count));
}

void active_forget_reset(ModelParameters& params, OptimizerState& opt, std::uint64_t seed,
                         std::int64_t& reset_count, const ResetOptions& options) {
  const double stddev = params.config.init_std;
  fill_normal(params.token_embedding, stddev, embedding_reset_seed(seed, reset_count));
  if (options.reset_lm_head) {
    fill_normal(params.lm_head, stddev, head_reset_seed(seed, reset_count));
  }
  if (options.reset_optimizer_state && !opt.m.empty()) {
    const auto refs = params.tensors();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const bool hit = refs[i].group == ParamGroup::embedding ||
                       (options.reset_lm_head && refs[i].group == ParamGroup::head);
      if (hit) {
        opt.m[i].fill(0.0f);
        opt.v[i].fill(0.0f);
      }
    }
  }
  ++reset_count;
}

void apply_freeze_mask(ModelParameters& grads, const FreezeSpec& freeze) {
  for (auto& ref : grads.tensors()) {
    if (group_frozen(ref.group, freeze)) {
      ref.tensor->fill(0.0f);
    } else if (ref.group == ParamGroup::embedding) {
      for (const TokenId r : freeze.frozen_embedding_rows) {
        if (r < ref.tensor->rows) std::ranges::fill(ref.tensor->row(r), 0.0f);
      }
    }
  }
}

std::string chat_serialization(const ChatExample& example) {
  std::string out;
  out += SpecialTokens::kImStart;
  out += "system\n" + example.system;
  out += SpecialTokens::kImEnd;
  out += "\n";
  out += SpecialTokens::kImStart;
  out += "user\n" + example.user;
  out += SpecialTokens::kImEnd;
  out += "\n";
  out += SpecialTokens::kImStart;
  out += "assistant\n";
  if (!example.assistant.empty()) {
    out += example.assistant;
    out += SpecialTokens::kImEnd;
  }
  return out;
}

TrainingSequence format_chat_example(const TokenizerModel& tokenizer, const ChatExample& example) {
  if (!tokenizer.has_chat_tokens()) {
    throw ConfigError("tokenizer lacks the chat special tokens");
  }
  TrainingSequence seq;
  auto append = [&](std::string_view text, bool target) {
    const auto ids = tokenizer.encode(text);
    seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
    seq.mask.insert(seq.mask.end(), ids.size(), target ? 1 : 0);
  };
  auto special = [&](TokenId id, bool target) {
    seq.ids.push_back(id);
    seq.mask.push_back(target ? 1 : 0);
  };
  special(SpecialTokens::im_start, false);
  append("system\n" + example.system, false);
  special(SpecialTokens::im_end, false);
  append("\n", false);
  special(SpecialTokens::im_start, false);
  append("user\n" + example.user, false);
  special(SpecialTokens::im_end, false);
  append("\n", false);
  special(SpecialTokens::im_start, false);
  append("assistant\n", false);
  if (!example.assistant.empty()) {
    append(example.assistant, true);
    special(SpecialTokens::im_end, true);
  }
  return seq;
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::pretrain: return "pretrain";
    case Stage::adapt: return "adapt";
    case Stage::finetune: return "finetune";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  if (name == "pretrain") return Stage::pretrain;
  if (name == "adapt") return Stage::adapt;
  if (name == "finetune") return Stage::finetune;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

TrainingState TrainingState::fresh(ModelParameters params, std::uint64_t seed) {
  TrainingState state;
  state.optimizer = OptimizerState::zeros_like(params);
  state.params = std::move(params);
  state.rng = Rng(mix_seed(seed, 0x62617463ULL));
  return state;
}

namespace {

void clip_gradients(ModelParameters& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& ref : grads.tensors()) {
    for (const float g : ref.tensor->data) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const float scale = static_cast<float>(max_norm / norm);
  for (auto& ref : grads.tensors()) {
    for (float& g : ref.tensor->data) g *= scale;
  }
}

}  // namespace

TrainingState run_stage(Stage stage, TrainingState state, std::span<const TrainingSequence> data,
                        const TrainingSchedule& schedule, const StageHooks& hooks) {
  schedule.validate();
  state.params.config.validate();
  if (data.empty()) throw DataError(std::string("no training data for stage ") + std::string(to_string(stage)));
  for (const auto& seq : data) {
    if (seq.ids.size() != seq.mask.size()) throw DataError("sequence/mask length mismatch");
    if (seq.ids.size() < 2) throw DataError("training sequences need at least 2 tokens");
    if (seq.ids.size() > state.params.config.block_size) {
      throw DataError("training sequence longer than block_size");
    }
  }
  for (const TokenId r : schedule.freeze.frozen_embedding_rows) {
    if (r >= state.params.config.vocab_size) throw ConfigError("frozen embedding row out of range");
  }
  if (state.optimizer.m.empty()) state.optimizer = OptimizerState::zeros_like(state.params);

  const bool resets = stage == Stage::pretrain && schedule.reset_interval.has_value();
  const ResetOptions reset_options{schedule.reset_lm_head, schedule.reset_optimizer_state};
  ModelParameters grads = ModelParameters::zeros(state.params.config);
  std::vector<std::size_t> batch(schedule.batch_size);

  while (state.step < schedule.total_steps) {
    for (auto& idx : batch) idx = static_cast<std::size_t>(state.rng.uniform_index(data.size()));
    std::size_t targets = 0;
    for (const auto idx : batch) {
      const auto& mask = data[idx].mask;
      targets += static_cast<std::size_t>(std::count(mask.begin() + 1, mask.end(), std::uint8_t{1}));
    }
    grads.set_zero();
    double nll = 0.0;
    if (targets > 0) {
      const float scale = 1.0f / static_cast<float>(targets);
      for (const auto idx : batch) {
        const auto& seq = data[idx];
        if (std::count(seq.mask.begin() + 1, seq.mask.end(), std::uint8_t{1}) == 0) continue;
        nll += accumulate_gradients(state.params, std::span<const TokenId>(seq.ids),
                                    std::span<const std::uint8_t>(seq.mask), grads, scale)
                   .nll_sum;
      }
    }
    const double loss = targets > 0 ? nll / static_cast<double>(targets) : 0.0;
    const double lr = lr_at(schedule, state.step + 1);
    try {
      if (!std::isfinite(loss)) {
        throw NumericError("loss diverged at step " + std::to_string(state.step + 1));
      }
      apply_freeze_mask(grads, schedule.freeze);
      if (schedule.grad_clip_norm) clip_gradients(grads, *schedule.grad_clip_norm);
      adamw_step(state.params, grads, state.optimizer, lr, schedule);
    } catch (const NumericError&) {
      if (hooks.on_divergence) hooks.on_divergence(state);
      throw;
    }
    state.step += 1;

    if (resets && should_reset(schedule, state.step)) {
      if (hooks.on_reset) {
        const TrainingState before = state;
        active_forget_reset(state.params, state.optimizer, schedule.seed, state.reset_count,
                            reset_options);
        hooks.on_reset(state.step, before, state);
      } else {
        active_forget_reset(state.params, state.optimizer, schedule.seed, state.reset_count,
                            reset_options);
      }
    }
    if (hooks.on_log &&
        (state.step % schedule.log_interval == 0 || state.step == schedule.total_steps)) {
      hooks.on_log(LogRecord{stage, state.step, lr, loss, state.reset_count});
    }
  }
  return state;
}

std::vector<TrainingSequence> sequences_from_blocks(const std::vector<std::vector<TokenId>>& blocks) {
  std::vector<TrainingSequence> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(TrainingSequence{b, TargetMask(b.size(), 1)});
  return out;
}

}  // namespace aflm
