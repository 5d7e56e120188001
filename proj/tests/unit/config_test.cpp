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


#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "aflm/config.hpp"
#include "aflm/errors.hpp"
#include "test_util.hpp"

namespace {

using namespace aflm;
using aflm::testing::TempDir;
using aflm::testing::write_file;

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Variant, Names) {
  EXPECT_EQ(parse_variant("baseline"), Variant::baseline);
  EXPECT_EQ(to_string(Variant::active_forgetting), "active_forgetting");
  EXPECT_THROW(parse_variant("af"), ConfigError);
}

TEST(PipelineConfig, ParseResolvesRelativePaths) {
  TempDir dir;
  write_file(dir / "manifest.json", "{}");
  write_file(dir / "chat.jsonl", "");
  write_file(dir / "cfg.json", R"({
    "corpus_manifest": "manifest.json",
    "output_dir": "out",
    "seed": 7,
    "variant": "active_forgetting",
    "tokenizer": {"base_size": 400, "adapt_budget": 50},
    "model": {"preset": "tiny", "block_size": 48},
    "pretrain": {"total_steps": 100, "reset_interval": 20, "peak_lr": 0.001},
    "finetune": {"chat_data": "chat.jsonl", "epochs": 1.5, "batch_size": 4},
    "eval": {"n_shots": 2, "isotropy": {"max_types": 10}}
  })");
  const auto cfg = PipelineConfig::load(dir / "cfg.json");
  EXPECT_EQ(cfg.corpus_manifest, dir / "manifest.json");
  EXPECT_EQ(cfg.output_dir, dir / "out");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.tokenizer.adapt_budget, 50u);
  EXPECT_EQ(cfg.model.d_model, ModelConfig::preset("tiny").d_model);
  EXPECT_EQ(cfg.model.block_size, 48u);
  EXPECT_EQ(cfg.pretrain.reset_interval, 20);
  EXPECT_EQ(cfg.pretrain.total_steps, 100);
  EXPECT_EQ(cfg.chat.data, dir / "chat.jsonl");
  EXPECT_EQ(cfg.chat.epochs, 1.5);
  EXPECT_EQ(cfg.finetune.batch_size, 4u);
  EXPECT_EQ(cfg.eval.n_shots, 2u);
  EXPECT_EQ(cfg.eval.isotropy.max_types, 10u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(PipelineConfig, JsonRoundTrip) {
  TempDir dir;
  write_file(dir / "m.json", "{}");
  auto cfg = PipelineConfig::parse(R"({"corpus_manifest": "m.json", "pretrain": {"reset_interval": 50}})",
                                   dir.path());
  cfg.eval.bleu_smoothing = 0.1;
  cfg.adapt.freeze = FreezeSpec::adaptation(300);
  const auto again = PipelineConfig::parse(cfg.to_json());
  EXPECT_EQ(again.to_json(), cfg.to_json());
  EXPECT_EQ(again.pretrain.reset_interval, 50);
  EXPECT_EQ(again.adapt.freeze, cfg.adapt.freeze);
}

TEST(PipelineConfig, AllProblemsReportedTogether) {
  const auto msg = error_of([] {
    PipelineConfig::parse(R"({"seed": "x", "bogus": 1, "model": {"preset": "nope"},
                              "pretrain": {"warmup_frac": "a"}, "eval": {"extra": 2}})");
  });
  EXPECT_NE(msg.find("seed"), std::string::npos) << msg;
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  EXPECT_NE(msg.find("model.preset"), std::string::npos) << msg;
  EXPECT_NE(msg.find("pretrain.warmup_frac"), std::string::npos) << msg;
  EXPECT_NE(msg.find("eval.extra"), std::string::npos) << msg;
}

TEST(PipelineConfig, ValidationListsEveryViolation) {
  PipelineConfig cfg;
  cfg.corpus_manifest = "/definitely/not/here.json";
  cfg.variant = Variant::baseline;  // default pretrain still has k
  cfg.tokenizer.base_size = 100;
  cfg.adapt.total_steps = 0;
  const auto problems = cfg.problems();
  EXPECT_EQ(problems.size(), 4u);
  const auto msg = error_of([&] { cfg.validate(); });
  EXPECT_NE(msg.find("does not exist"), std::string::npos);
  EXPECT_NE(msg.find("baseline"), std::string::npos);
  EXPECT_NE(msg.find("base_size"), std::string::npos);
  EXPECT_NE(msg.find("adapt"), std::string::npos);
}

TEST(PipelineConfig, VariantResetInvariant) {
  TempDir dir;
  write_file(dir / "m.json", "{}");
  auto cfg = PipelineConfig::parse(R"({"corpus_manifest": "m.json", "variant": "baseline"})", dir.path());
  EXPECT_FALSE(cfg.pretrain.reset_interval.has_value());
  EXPECT_NO_THROW(cfg.validate());
  cfg = PipelineConfig::parse(R"({"corpus_manifest": "m.json", "pretrain": {"total_steps": 10}})",
                              dir.path());
  EXPECT_THROW(cfg.validate(), ConfigError);  // active forgetting needs k
  cfg = PipelineConfig::parse(
      R"({"corpus_manifest": "m.json", "variant": "baseline", "pretrain": {"reset_interval": 5}})",
      dir.path());
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PipelineConfig, NotJson) {
  EXPECT_THROW(PipelineConfig::parse("{"), ConfigError);
  TempDir dir;
  EXPECT_THROW(PipelineConfig::load(dir / "missing.json"), ConfigError);
}

TEST(ScheduleJson, RoundTrip) {
  auto s = TrainingSchedule::full_scale_pretraining();
  s.grad_clip_norm = 1.0;
  s.freeze.frozen_embedding_rows = {1, 2, 3, 7, 9, 10};
  const auto back = schedule_from_json(schedule_to_json(s));
  EXPECT_EQ(schedule_to_json(back), schedule_to_json(s));
  EXPECT_EQ(back.freeze, s.freeze);
  EXPECT_EQ(back.reset_interval, 10000);
  EXPECT_EQ(model_config_from_json(model_config_to_json(ModelConfig::preset("small"))),
            ModelConfig::preset("small"));
}

}  // namespace
