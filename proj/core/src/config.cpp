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


#include "aflm/config.hpp"

#include <fstream>
#include <sstream>

#include "aflm/corpus.hpp"
#include "aflm/errors.hpp"
#include "json_convert.hpp"

namespace aflm {

namespace detail {

FieldReader::FieldReader(const json& object, std::string prefix, std::vector<std::string>& problems)
    : object_(object), prefix_(std::move(prefix)), problems_(problems) {
  if (!object_.is_object()) problems_.push_back(prefix_ + ": expected an object");
}

const json* FieldReader::child(const char* key) {
  seen_.emplace_back(key);
  if (!object_.is_object() || !object_.contains(key)) return nullptr;
  return &object_.at(key);
}

void FieldReader::finish() {
  if (!object_.is_object()) return;
  for (const auto& [key, value] : object_.items()) {
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
      problems_.push_back(prefix_ + key + ": unknown key");
    }
  }
}

json model_config_json(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
              {"d_model", c.d_model},       {"d_ff", c.d_ff},
              {"vocab_size", c.vocab_size}, {"block_size", c.block_size},
              {"norm_epsilon", c.norm_epsilon}, {"rope_base", c.rope_base},
              {"init_std", c.init_std}};
}

void read_model_config(FieldReader& r, ModelConfig& c) {
  r.read("n_layers", c.n_layers);
  r.read("n_heads", c.n_heads);
  r.read("d_model", c.d_model);
  r.read("d_ff", c.d_ff);
  r.read("vocab_size", c.vocab_size);
  r.read("block_size", c.block_size);
  r.read("norm_epsilon", c.norm_epsilon);
  r.read("rope_base", c.rope_base);
  r.read("init_std", c.init_std);
}

namespace {

// Sorted IDs as inclusive [lo, hi] runs.
json rows_to_ranges(const std::vector<TokenId>& rows) {
  json out = json::array();
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j + 1 < rows.size() && rows[j + 1] == rows[j] + 1) ++j;
    out.push_back(json::array({rows[i], rows[j]}));
    i = j + 1;
  }
  return out;
}

}  // namespace

json schedule_json(const TrainingSchedule& s) {
  json j{{"peak_lr", s.peak_lr},
         {"total_steps", s.total_steps},
         {"warmup_frac", s.warmup_frac},
         {"batch_size", s.batch_size},
         {"weight_decay", s.weight_decay},
         {"reset_interval", s.reset_interval ? json(*s.reset_interval) : json(nullptr)},
         {"seed", s.seed},
         {"beta1", s.beta1},
         {"beta2", s.beta2},
         {"epsilon", s.epsilon},
         {"reset_lm_head", s.reset_lm_head},
         {"reset_optimizer_state", s.reset_optimizer_state},
         {"grad_clip_norm", s.grad_clip_norm ? json(*s.grad_clip_norm) : json(nullptr)},
         {"log_interval", s.log_interval}};
  j["freeze"] = json{{"trunk_frozen", s.freeze.trunk_frozen},
                     {"head_frozen", s.freeze.head_frozen},
                     {"frozen_embedding_rows", rows_to_ranges(s.freeze.frozen_embedding_rows)}};
  return j;
}

void read_schedule(const json& object, const std::string& prefix, TrainingSchedule& s,
                   std::vector<std::string>& problems) {
  FieldReader r(object, prefix, problems);
  r.read("peak_lr", s.peak_lr);
  r.read("total_steps", s.total_steps);
  r.read("warmup_frac", s.warmup_frac);
  r.read("batch_size", s.batch_size);
  r.read("weight_decay", s.weight_decay);
  r.read_optional("reset_interval", s.reset_interval);
  r.read("seed", s.seed);
  r.read("beta1", s.beta1);
  r.read("beta2", s.beta2);
  r.read("epsilon", s.epsilon);
  r.read("reset_lm_head", s.reset_lm_head);
  r.read("reset_optimizer_state", s.reset_optimizer_state);
  r.read_optional("grad_clip_norm", s.grad_clip_norm);
  r.read("log_interval", s.log_interval);
  if (const json* f = r.child("freeze")) {
    FieldReader fr(*f, prefix + "freeze.", problems);
    fr.read("trunk_frozen", s.freeze.trunk_frozen);
    fr.read("head_frozen", s.freeze.head_frozen);
    if (const json* rows = fr.child("frozen_embedding_rows")) {
      s.freeze.frozen_embedding_rows.clear();
      try {
        for (const auto& range : *rows) {
          const auto lo = range.at(0).get<TokenId>();
          const auto hi = range.at(1).get<TokenId>();
          for (auto id = lo; id <= hi; ++id) s.freeze.frozen_embedding_rows.push_back(id);
        }
      } catch (const json::exception&) {
        problems.push_back(prefix + "freeze.frozen_embedding_rows: expected [[lo, hi], ...]");
      }
    }
    fr.finish();
  }
  r.finish();
}

}  // namespace detail

using detail::json;

std::string_view to_string(Variant variant) noexcept {
  return variant == Variant::baseline ? "baseline" : "active_forgetting";
}

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "active_forgetting") return Variant::active_forgetting;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected baseline or active_forgetting)");
}

PipelineConfig::PipelineConfig() {
  adapt.peak_lr = 1e-3;
  adapt.total_steps = 300;
  adapt.batch_size = 16;
  finetune.peak_lr = 1e-4;
  finetune.batch_size = 16;
  chat.epochs = 2.0;
}

std::vector<std::string> PipelineConfig::problems() const {
  std::vector<std::string> out;
  auto collect = [&out](const std::string& prefix, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      out.push_back(prefix + e.what());
    }
  };
  if (corpus_manifest.empty()) {
    out.push_back("corpus_manifest: missing");
  } else if (!std::filesystem::exists(corpus_manifest)) {
    out.push_back("corpus_manifest: " + corpus_manifest.string() + " does not exist");
  }
  if (chat.data && !std::filesystem::exists(*chat.data)) {
    out.push_back("finetune.chat_data: " + chat.data->string() + " does not exist");
  }
  if (!(chat.epochs >= 0.0)) out.push_back("finetune.epochs: must be >= 0");
  if (tokenizer.base_size < SpecialTokens::count + 256) {
    out.push_back("tokenizer.base_size: must be >= 260");
  }
  collect("model: ", [&] { model.validate(); });
  collect("pretrain: ", [&] { pretrain.validate(); });
  collect("adapt: ", [&] { adapt.validate(); });
  collect("finetune: ", [&] { finetune.validate(); });
  if (variant == Variant::baseline && pretrain.reset_interval) {
    out.push_back("pretrain.reset_interval: must be absent for the baseline variant");
  }
  if (variant == Variant::active_forgetting && !pretrain.reset_interval) {
    out.push_back("pretrain.reset_interval: required for the active_forgetting variant");
  }
  collect("eval.isotropy: ", [&] { eval.isotropy.validate(); });
  if (eval.max_blocks < 1) out.push_back("eval.max_blocks: must be >= 1");
  if (!(eval.bleu_smoothing >= 0.0)) out.push_back("eval.bleu_smoothing: must be >= 0");
  if (output_dir.empty()) out.push_back("output_dir: missing");
  return out;
}

void PipelineConfig::validate() const {
  const auto list = problems();
  if (list.empty()) return;
  std::string msg = "invalid pipeline config:";
  for (const auto& p : list) msg += "\n  - " + p;
  throw ConfigError(msg);
}

PipelineConfig PipelineConfig::parse(std::string_view json_text,
                                     const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  std::vector<std::string> problems;
  PipelineConfig cfg;
  auto resolve = [&base_dir](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  detail::FieldReader r(root, "", problems);
  std::string manifest;
  r.read("corpus_manifest", manifest);
  if (!manifest.empty()) cfg.corpus_manifest = resolve(manifest);
  std::string output;
  r.read("output_dir", output);
  if (!output.empty()) cfg.output_dir = resolve(output);
  r.read("seed", cfg.seed);
  r.read("save_optimizer", cfg.save_optimizer);
  std::string variant;
  r.read("variant", variant);
  if (!variant.empty()) {
    try {
      cfg.variant = parse_variant(variant);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("variant: ") + e.what());
    }
  }
  if (const json* t = r.child("tokenizer")) {
    detail::FieldReader tr(*t, "tokenizer.", problems);
    tr.read("base_size", cfg.tokenizer.base_size);
    tr.read("adapt_budget", cfg.tokenizer.adapt_budget);
    tr.finish();
  }
  if (const json* m = r.child("model")) {
    detail::FieldReader mr(*m, "model.", problems);
    mr.read("preset", cfg.model_preset);
    try {
      cfg.model = ModelConfig::preset(cfg.model_preset);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("model.preset: ") + e.what());
    }
    detail::read_model_config(mr, cfg.model);
    mr.finish();
  }
  if (const json* p = r.child("pretrain")) {
    // A missing reset_interval means "none" for baseline configs.
    if (p->is_object() && !p->contains("reset_interval")) cfg.pretrain.reset_interval.reset();
    detail::read_schedule(*p, "pretrain.", cfg.pretrain, problems);
  } else if (cfg.variant == Variant::baseline) {
    cfg.pretrain.reset_interval.reset();
  }
  if (const json* a = r.child("adapt")) detail::read_schedule(*a, "adapt.", cfg.adapt, problems);
  if (const json* f = r.child("finetune")) {
    json schedule = *f;
    if (schedule.is_object()) {
      if (schedule.contains("chat_data")) {
        try {
          cfg.chat.data = resolve(schedule.at("chat_data").get<std::string>());
        } catch (const json::exception&) {
          problems.push_back("finetune.chat_data: wrong type");
        }
        schedule.erase("chat_data");
      }
      if (schedule.contains("epochs")) {
        try {
          cfg.chat.epochs = schedule.at("epochs").get<double>();
        } catch (const json::exception&) {
          problems.push_back("finetune.epochs: wrong type");
        }
        schedule.erase("epochs");
      }
    }
    detail::read_schedule(schedule, "finetune.", cfg.finetune, problems);
  }
  if (const json* e = r.child("eval")) {
    detail::FieldReader er(*e, "eval.", problems);
    er.read("max_blocks", cfg.eval.max_blocks);
    er.read("translation", cfg.eval.translation);
    er.read("n_shots", cfg.eval.n_shots);
    er.read("max_queries", cfg.eval.max_queries);
    er.read("max_new_tokens", cfg.eval.max_new_tokens);
    er.read("bleu_smoothing", cfg.eval.bleu_smoothing);
    if (const json* iso = er.child("isotropy")) {
      detail::FieldReader ir(*iso, "eval.isotropy.", problems);
      ir.read("min_contexts", cfg.eval.isotropy.min_contexts);
      ir.read("max_types", cfg.eval.isotropy.max_types);
      ir.read("max_contexts", cfg.eval.isotropy.max_contexts);
      ir.read("sample_seed", cfg.eval.isotropy.sample_seed);
      ir.finish();
    }
    er.finish();
  }
  r.finish();
  if (!problems.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

std::string PipelineConfig::to_json() const {
  json j;
  j["corpus_manifest"] = corpus_manifest.string();
  j["output_dir"] = output_dir.string();
  j["seed"] = seed;
  j["save_optimizer"] = save_optimizer;
  j["variant"] = std::string(to_string(variant));
  j["tokenizer"] = json{{"base_size", tokenizer.base_size}, {"adapt_budget", tokenizer.adapt_budget}};
  json m = detail::model_config_json(model);
  m["preset"] = model_preset;
  j["model"] = m;
  j["pretrain"] = detail::schedule_json(pretrain);
  j["adapt"] = detail::schedule_json(adapt);
  json f = detail::schedule_json(finetune);
  f["epochs"] = chat.epochs;
  if (chat.data) f["chat_data"] = chat.data->string();
  j["finetune"] = f;
  j["eval"] = json{{"max_blocks", eval.max_blocks},
                   {"translation", eval.translation},
                   {"n_shots", eval.n_shots},
                   {"max_queries", eval.max_queries},
                   {"max_new_tokens", eval.max_new_tokens},
                   {"bleu_smoothing", eval.bleu_smoothing},
                   {"isotropy", json{{"min_contexts", eval.isotropy.min_contexts},
                                     {"max_types", eval.isotropy.max_types},
                                     {"max_contexts", eval.isotropy.max_contexts},
                                     {"sample_seed", eval.isotropy.sample_seed}}}};
  return j.dump(2) + "\n";
}

std::string schedule_to_json(const TrainingSchedule& schedule) {
  return detail::schedule_json(schedule).dump();
}

TrainingSchedule schedule_from_json(std::string_view text) {
  std::vector<std::string> problems;
  TrainingSchedule s;
  try {
    detail::read_schedule(json::parse(text), "", s, problems);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule is not valid JSON: ") + e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid schedule:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return s;
}

std::string model_config_to_json(const ModelConfig& config) {
  return detail::model_config_json(config).dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  std::vector<std::string> problems;
  ModelConfig c;
  try {
    const json j = json::parse(text);
    detail::FieldReader r(j, "", problems);
    detail::read_model_config(r, c);
    r.finish();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

}  // namespace aflm
