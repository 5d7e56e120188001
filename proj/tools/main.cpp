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


// Command-line driver: pretrain, adapt, finetune, eval, compare, gen-corpus.
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aflm/config.hpp"
#include "aflm/corpus.hpp"
#include "aflm/errors.hpp"
#include "aflm/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> steps;
  std::optional<double> epochs;
};

aflm::PipelineConfig load_config(const std::string& path, const Overrides& o, aflm::Stage stage) {
  auto cfg = aflm::PipelineConfig::load(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.variant) {
    cfg.variant = aflm::parse_variant(*o.variant);
    // The baseline arm trains the same schedule without resets.
    if (cfg.variant == aflm::Variant::baseline) cfg.pretrain.reset_interval.reset();
  }
  if (o.steps) {
    if (stage == aflm::Stage::pretrain) cfg.pretrain.total_steps = *o.steps;
    if (stage == aflm::Stage::adapt) cfg.adapt.total_steps = *o.steps;
  }
  if (o.epochs) cfg.chat.epochs = *o.epochs;
  return cfg;
}

void add_common(CLI::App* cmd, std::string& config, Overrides& o) {
  cmd->add_option("--config", config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the global seed");
  cmd->add_option("--output-dir", o.output_dir, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aflm: pretraining with active forgetting, language adaptation, and evaluation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress output");

  std::string config;
  std::string checkpoint;
  std::string out;
  Overrides o;
  std::vector<std::string> reports;
  std::optional<std::string> manifest;
  std::size_t chat = 2000;
  std::uint64_t chat_seed = 0;

  auto* pretrain = app.add_subcommand("pretrain", "train the base model and tokenizer");
  add_common(pretrain, config, o);
  pretrain->add_option("--variant", o.variant, "baseline or active_forgetting");
  pretrain->add_option("--steps", o.steps, "override pretrain.total_steps");

  auto* adapt = app.add_subcommand("adapt", "expand the vocabulary and train new embeddings");
  add_common(adapt, config, o);
  adapt->add_option("--checkpoint", checkpoint, "pretrain checkpoint")->required()->check(CLI::ExistingFile);
  adapt->add_option("--steps", o.steps, "override adapt.total_steps");

  auto* finetune = app.add_subcommand("finetune", "instruction-finetune a checkpoint on chat data");
  add_common(finetune, config, o);
  finetune->add_option("--checkpoint", checkpoint, "pretrain or adapt checkpoint")->required()->check(CLI::ExistingFile);
  finetune->add_option("--epochs", o.epochs, "override finetune.epochs");

  auto* eval = app.add_subcommand("eval", "perplexity, isotropy and translation BLEU per language");
  add_common(eval, config, o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "report directory (default: the output directory)");

  auto* compare = app.add_subcommand("compare", "compare eval reports across arms");
  compare->add_option("--config", config, "pipeline config (unused; accepted for uniformity)");
  compare->add_option("reports", reports, "report.json files")->required()->expected(2, -1)->check(CLI::ExistingFile);
  compare->add_option("--out", out, "output directory")->required();

  auto* gen = app.add_subcommand("gen-corpus", "write synthetic corpora, parallel pairs and chat data");
  gen->add_option("--config", config, "pipeline config naming the corpus manifest");
  gen->add_option("--manifest", manifest, "corpus manifest (instead of --config)");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--chat", chat, "number of chat examples to generate");
  gen->add_option("--seed", chat_seed, "seed for chat generation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  aflm::RunOptions run;
  if (!quiet) run.progress = &std::cerr;
  try {
    if (*pretrain) {
      const auto cfg = load_config(config, o, aflm::Stage::pretrain);
      std::cout << aflm::cmd_pretrain(cfg, run).string() << '\n';
    } else if (*adapt) {
      const auto cfg = load_config(config, o, aflm::Stage::adapt);
      std::cout << aflm::cmd_adapt(cfg, checkpoint, run).string() << '\n';
    } else if (*finetune) {
      const auto cfg = load_config(config, o, aflm::Stage::finetune);
      std::cout << aflm::cmd_finetune(cfg, checkpoint, run).string() << '\n';
    } else if (*eval) {
      const auto cfg = load_config(config, o, aflm::Stage::finetune);
      const fs::path dir = out.empty() ? cfg.output_dir : fs::path(out);
      const auto report = aflm::cmd_eval(cfg, checkpoint, dir, run);
      std::cout << report.to_csv();
    } else if (*compare) {
      std::vector<fs::path> paths(reports.begin(), reports.end());
      const auto table = aflm::cmd_compare(paths, out);
      std::cout << table.to_markdown();
    } else if (*gen) {
      aflm::CorpusManifest m;
      if (manifest) {
        m = aflm::CorpusManifest::load(*manifest);
      } else if (!config.empty()) {
        m = aflm::CorpusManifest::load(aflm::PipelineConfig::load(config).corpus_manifest);
      } else {
        throw aflm::ConfigError("gen-corpus needs --config or --manifest");
      }
      std::cout << aflm::cmd_gen_corpus(m, out, chat, chat_seed).string() << '\n';
    }
  } catch (const aflm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
