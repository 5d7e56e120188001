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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aflm/checkpoint.hpp"
#include "aflm/config.hpp"
#include "aflm/corpus.hpp"
#include "aflm/evaluation.hpp"
#include "aflm/report.hpp"
#include "aflm/tokenizer.hpp"
#include "aflm/training.hpp"

namespace aflm {

// Artifact names inside an output directory.
struct Artifacts {
  static constexpr const char* kBaseTokenizer = "tokenizer.base.txt";
  static constexpr const char* kAdaptingTokenizer = "tokenizer.adapting.txt";
  static constexpr const char* kMergedTokenizer = "tokenizer.merged.txt";
  static constexpr const char* kLock = ".aflm.lock";
  static std::string checkpoint(Stage stage);      // "<stage>.ckpt"
  static std::string log(Stage stage);             // "<stage>.log.jsonl"
  static std::string diverged(Stage stage);        // "<stage>.diverged.ckpt"
};

// Exclusive claim on an output directory, released on destruction. Throws
// PipelineError when another stage holds the directory.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path file_;
};

struct RunOptions {
  std::ostream* progress = nullptr;  // human-readable log lines
};

struct LoadedModel {
  Checkpoint checkpoint;
  TokenizerModel tokenizer;
};

// Loads a checkpoint and the tokenizer file named in its manifest,
// verifying the tokenizer hash.
LoadedModel load_model(const std::filesystem::path& checkpoint_path);

// Arm tag of a model finetuned from `input`: "Baseline" from a pretrained
// checkpoint, "BA" or "AFA" from an adapted one.
std::string arm_for(const CheckpointManifest& input);

// Reads JSONL {"system","user","assistant"}; DataError names the line.
std::vector<ChatExample> load_chat_examples(const std::filesystem::path& path);
void save_chat_examples(const std::vector<ChatExample>& examples, const std::filesystem::path& path);

// Instruction data in the manifest's source language: repeat and
// word-reversal tasks over generated sentences.
std::vector<ChatExample> generate_chat_examples(const CorpusManifest& manifest, std::size_t n,
                                                std::uint64_t seed);

// Held-out evaluation blocks of one language: full blocks first, then the
// trailing remainder when it has at least two tokens.
std::vector<std::vector<TokenId>> evaluation_blocks(const std::vector<std::vector<TokenId>>& documents,
                                                    std::size_t block_size, TokenId eos_id,
                                                    std::size_t max_blocks);

std::filesystem::path cmd_pretrain(const PipelineConfig& config, const RunOptions& options = {});
std::filesystem::path cmd_adapt(const PipelineConfig& config,
                                const std::filesystem::path& base_checkpoint,
                                const RunOptions& options = {});
std::filesystem::path cmd_finetune(const PipelineConfig& config,
                                   const std::filesystem::path& checkpoint,
                                   const RunOptions& options = {});
// Writes report.json and report.csv into out_dir.
EvalReport cmd_eval(const PipelineConfig& config, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& out_dir, const RunOptions& options = {});
// Writes comparison.csv, comparison.md and one chart per metric.
ComparisonTable cmd_compare(std::span<const std::filesystem::path> reports,
                            const std::filesystem::path& out_dir);
// Writes every language as a record-per-document text file, parallel pairs
// as JSONL, chat.jsonl, and a manifest.json over those files.
std::filesystem::path cmd_gen_corpus(const CorpusManifest& manifest,
                                     const std::filesystem::path& out_dir,
                                     std::size_t chat_examples, std::uint64_t seed);

}  // namespace aflm
