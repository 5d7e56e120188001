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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aflm/corpus.hpp"
#include "aflm/model.hpp"
#include "aflm/tokenizer.hpp"
#include "aflm/training.hpp"

namespace aflm {

struct LanguageMetrics {
  double perplexity = 0.0;
  double isotropy = 0.0;
  std::optional<double> bleu;
  bool operator==(const LanguageMetrics&) const = default;
};

// Class means per metric; empty when no evaluated language carries the
// metric.
struct MetricMeans {
  std::optional<double> perplexity;
  std::optional<double> isotropy;
  std::optional<double> bleu;
  bool operator==(const MetricMeans&) const = default;
};

struct ClassAggregates {
  MetricMeans mu_pretraining;
  MetricMeans mu_adapting;
  MetricMeans mu_other;
  MetricMeans mu_overall;
  bool operator==(const ClassAggregates&) const = default;
};

struct LanguageRow {
  std::string lang_id;
  LanguageClass cls = LanguageClass::pretraining;
  LanguageMetrics metrics;
  bool operator==(const LanguageRow&) const = default;
};

struct EvalReport {
  std::string model_tag;
  std::int64_t step = 0;
  std::vector<LanguageRow> rows;  // manifest order
  ClassAggregates aggregates;

  // Recomputes `aggregates` from `rows`.
  void aggregate();
  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
  // One line per language plus one per class aggregate.
  std::string to_csv() const;
  std::vector<std::string> lang_ids() const;
  bool operator==(const EvalReport&) const = default;
};

struct IsotropyConfig {
  std::size_t min_contexts = 5;  // occurrences required per token type
  std::size_t max_types = 64;
  std::size_t max_contexts = 32;  // occurrences kept per type, first seen
  std::uint64_t sample_seed = 0;
  void validate() const;
};

// exp of the token-mean NLL over every next-token target of `blocks`.
// Throws DataError when there is no target.
double perplexity(const ModelParameters& params, std::span<const std::vector<TokenId>> blocks);

// Mean pairwise cosine similarity of one token type's context vectors. A
// zero vector has cosine 0 with everything.
double self_similarity(std::span<const std::vector<double>> vectors);

// Mean self-similarity over up to cfg.max_types qualifying types, sampled
// with cfg.sample_seed. Throws DataError when no type qualifies.
double isotropy_from_contexts(const std::map<TokenId, std::vector<std::vector<double>>>& contexts,
                              const IsotropyConfig& cfg);

// Collects final-layer hidden states per token type over `sample` (special
// tokens excluded) and scores them with isotropy_from_contexts.
double isotropy_self_similarity(const ModelParameters& params,
                                std::span<const std::vector<TokenId>> sample,
                                const IsotropyConfig& cfg);

// Splits on ASCII whitespace and on any byte in `extra_separators`.
std::vector<std::string> split_words(std::string_view text, std::string_view extra_separators = {});

struct BleuOptions {
  std::size_t max_order = 4;
  // Zero n-gram matches count as epsilon matches when > 0.
  double smoothing_epsilon = 0.0;
};

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped, per order
  std::vector<std::size_t> totals;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

BleuStats bleu_stats(std::span<const std::vector<std::string>> hypotheses,
                     std::span<const std::vector<std::string>> references,
                     std::size_t max_order = 4);

// Corpus BLEU: brevity penalty times the geometric mean of clipped n-gram
// precisions. Throws DataError on an empty corpus or a count mismatch.
double bleu(std::span<const std::vector<std::string>> hypotheses,
            std::span<const std::vector<std::string>> references,
            const BleuOptions& options = {});

// System text of the evaluation chat template.
std::string_view translation_system_prompt() noexcept;

// "1st", "2nd", "3rd", "4th", ..., "11th", "21st".
std::string ordinal(std::size_t n);

ChatExample build_translation_prompt(std::string_view source_name, std::string_view target_name,
                                     std::span<const ParallelPair> exemplars,
                                     std::string_view query);

struct TranslationOptions {
  std::size_t n_shots = 4;
  std::size_t max_queries = 0;  // 0 = every pair after the exemplars
  std::size_t max_new_tokens = 64;
  std::string source_name = "English";
  std::string target_name;
  std::string word_separators;  // extra BLEU word separators
  BleuOptions bleu;
};

// Produces a hypothesis for one prompt. The default decodes greedily.
using GenerateFn = std::function<std::string(const ChatExample& prompt, const ParallelPair& query)>;

struct TranslationResult {
  double bleu = 0.0;
  std::vector<std::string> hypotheses;
  std::vector<std::string> references;
};

// The first n_shots pairs are the exemplars; the following pairs are the
// queries. Prompts longer than the context keep their most recent tokens.
// Throws DataError naming the language when there are too few pairs.
TranslationResult translate_eval(const ModelParameters& params, const TokenizerModel& tokenizer,
                                 std::span<const ParallelPair> pairs,
                                 const TranslationOptions& options,
                                 const GenerateFn& generate = {});

// Greedy decode of a chat prompt up to <|im_end|> or end of text.
std::string generate_reply(const ModelParameters& params, const TokenizerModel& tokenizer,
                           const ChatExample& prompt, std::size_t max_new_tokens);

// Throws ConfigError naming any language missing from `classes`.
ClassAggregates aggregate_by_class(const std::map<std::string, LanguageMetrics>& per_language,
                                   const std::map<std::string, LanguageClass>& classes);

// Scalar form used for a single metric.
struct ScalarAggregates {
  std::optional<double> mu_pretraining;
  std::optional<double> mu_adapting;
  std::optional<double> mu_other;
  std::optional<double> mu_overall;
};
ScalarAggregates aggregate_values(const std::map<std::string, double>& values,
                                  const std::map<std::string, LanguageClass>& classes);

}  // namespace aflm
