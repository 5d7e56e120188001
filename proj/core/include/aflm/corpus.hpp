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

#include "aflm/types.hpp"

namespace aflm {

enum class LanguageClass { pretraining, adapting, other };

std::string_view to_string(LanguageClass cls) noexcept;
// Throws ConfigError on an unknown name.
LanguageClass parse_language_class(std::string_view name);

// Parameters of a synthetic language. The alphabet is the inclusive byte
// range [alphabet_lo, alphabet_hi]; alphabet_lo separates words,
// alphabet_lo + 1 terminates sentences, the rest spell words. Every byte a
// synthetic language emits lies inside its alphabet.
struct SynthParams {
  std::uint8_t alphabet_lo = 0x61;
  std::uint8_t alphabet_hi = 0x6A;
  std::size_t lexicon_size = 64;
  std::size_t min_sentence_words = 4;
  std::size_t max_sentence_words = 10;
  std::size_t min_doc_sentences = 3;
  std::size_t max_doc_sentences = 8;
  std::uint64_t seed_offset = 0;

  void validate() const;
};

struct LanguageSpec {
  std::string lang_id;
  LanguageClass cls = LanguageClass::pretraining;
  std::optional<SynthParams> synth;
};

// Sentence-structure generator shared by all synthetic languages: a sparse
// first-order Markov chain over abstract concepts. Languages differ only in
// how they spell concepts, so structure learned in one transfers to others.
struct Grammar {
  std::size_t concepts = 64;
  std::size_t branching = 4;
  std::uint64_t seed = 0x5eed;

  bool operator==(const Grammar&) const = default;
};

struct Document {
  std::string doc_id;
  std::string lang_id;
  std::string text;
};

struct ParallelPair {
  std::string source;
  std::string target;
};

// Documents are a pure function of (spec, n_docs, seed, grammar).
std::vector<std::string> generate_synthetic_corpus(const LanguageSpec& spec,
                                                   std::size_t n_docs,
                                                   std::uint64_t seed,
                                                   const Grammar& grammar = {});

// Single sentences sharing one concept sequence, rendered in both languages.
std::vector<ParallelPair> generate_parallel_pairs(const LanguageSpec& source,
                                                  const LanguageSpec& target,
                                                  std::size_t n_pairs,
                                                  std::uint64_t seed,
                                                  const Grammar& grammar = {});

// Sentences of one language, one per element, without terminators.
std::vector<std::string> generate_sentences(const LanguageSpec& spec,
                                            std::size_t n_sentences,
                                            std::uint64_t seed,
                                            const Grammar& grammar = {});

struct IngestOptions {
  // One document per blank-line-delimited record instead of one per file.
  bool split_records = false;
};

bool is_valid_utf8(std::string_view bytes) noexcept;

// `path` may be a file or a directory (regular files, sorted by name,
// non-recursive). Throws IoError when unreadable and DataError naming the
// file on invalid UTF-8.
std::vector<Document> ingest_text_corpus(const std::filesystem::path& path,
                                         std::string_view lang_id,
                                         const IngestOptions& options = {});

struct BlockStream {
  std::size_t block_size = 0;
  TokenId eos_id = 0;
  std::vector<std::vector<TokenId>> blocks;
};

// Concatenates the documents with eos_id after each and cuts the stream
// into full blocks; the trailing remainder is dropped.
BlockStream pack_blocks(const std::vector<std::vector<TokenId>>& documents,
                        std::size_t block_size, TokenId eos_id);

struct LanguageSource {
  LanguageSpec spec;
  std::size_t n_docs = 0;  // synthetic languages
  std::optional<std::filesystem::path> path;  // ingested languages
  bool split_records = false;
  std::size_t parallel_pairs = 0;  // synthetic pairs from source_language
  std::optional<std::filesystem::path> parallel_path;  // JSONL {"source","target"}
  // Extra word-boundary bytes for BLEU on ingested text.
  std::string word_separators;

  // Synthetic separator and terminator bytes, else word_separators.
  std::string bleu_separators() const;
};

struct CorpusManifest {
  std::vector<LanguageSource> languages;
  double split = 0.1;
  std::uint64_t seed = 0;
  Grammar grammar;
  // Language playing the role of English: chat data and translation
  // sources are drawn from it.
  std::string source_language;

  const LanguageSource* find(std::string_view lang_id) const noexcept;
  std::vector<std::string> lang_ids() const;
  std::vector<std::string> lang_ids(LanguageClass cls) const;

  // Throws ConfigError listing every violation.
  void validate() const;

  static CorpusManifest parse(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
  static CorpusManifest load(const std::filesystem::path& path);
  std::string to_json() const;
};

// Hash-based, per-document validation assignment; stable across runs.
bool is_validation_document(std::string_view doc_id, double split) noexcept;

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> validation;
};

// Materializes every language in manifest order (synthetic languages are
// generated, file languages ingested).
std::vector<Document> materialize_corpus(const CorpusManifest& manifest);
CorpusSplit split_corpus(const std::vector<Document>& documents, double split);

std::vector<ParallelPair> load_parallel_pairs(const CorpusManifest& manifest,
                                              const LanguageSource& language);

}  // namespace aflm
