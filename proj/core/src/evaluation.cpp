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


#include "aflm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"

#include "aflm/errors.hpp"
#include "aflm/random.hpp"

namespace aflm {

using nlohmann::json;

double perplexity(const ModelParameters& params, std::span<const std::vector<TokenId>> blocks) {
  double nll = 0.0;
  std::size_t targets = 0;
  for (const auto& block : blocks) {
    if (block.size() < 2) continue;
    const TargetMask mask(block.size(), 1);
    const auto sum = nll_sum(params, std::span<const TokenId>(block), std::span<const std::uint8_t>(mask));
    nll += sum.nll_sum;
    targets += sum.targets;
  }
  if (targets == 0) throw DataError("perplexity needs at least one target token");
  return std::exp(nll / static_cast<double>(targets));
}

void IsotropyConfig::validate() const {
  if (min_contexts < 2) throw ConfigError("isotropy min_contexts must be >= 2");
  if (max_types < 1) throw ConfigError("isotropy max_types must be >= 1");
  if (max_contexts < min_contexts) throw ConfigError("isotropy max_contexts must be >= min_contexts");
}

double self_similarity(std::span<const std::vector<double>> vectors) {
  if (vectors.size() < 2) throw DataError("self-similarity needs at least two vectors");
  std::vector<double> norms;
  norms.reserve(vectors.size());
  for (const auto& v : vectors) {
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    norms.push_back(std::sqrt(sq));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < vectors.size(); ++a) {
    for (std::size_t b = a + 1; b < vectors.size(); ++b) {
      ++pairs;
      if (norms[a] == 0.0 || norms[b] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < vectors[a].size(); ++k) dot += vectors[a][k] * vectors[b][k];
      total += std::clamp(dot / (norms[a] * norms[b]), -1.0, 1.0);
    }
  }
  return total / static_cast<double>(pairs);
}

double isotropy_from_contexts(const std::map<TokenId, std::vector<std::vector<double>>>& contexts,
                              const IsotropyConfig& cfg) {
  cfg.validate();
  std::vector<TokenId> qualifying;
  for (const auto& [id, vecs] : contexts) {
    if (vecs.size() >= cfg.min_contexts) qualifying.push_back(id);
  }
  if (qualifying.empty()) {
    throw DataError("no token type occurs in at least " + std::to_string(cfg.min_contexts) +
                    " contexts");
  }
  if (qualifying.size() > cfg.max_types) {
    Rng rng(cfg.sample_seed);
    for (std::size_t i = 0; i < cfg.max_types; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.uniform_index(qualifying.size() - i));
      std::swap(qualifying[i], qualifying[j]);
    }
    qualifying.resize(cfg.max_types);
    std::sort(qualifying.begin(), qualifying.end());
  }
  double total = 0.0;
  for (const TokenId id : qualifying) {
    const auto& vecs = contexts.at(id);
    const std::size_t n = std::min(vecs.size(), cfg.max_contexts);
    total += self_similarity(std::span<const std::vector<double>>(vecs.data(), n));
  }
  return total / static_cast<double>(qualifying.size());
}

double isotropy_self_similarity(const ModelParameters& params,
                                std::span<const std::vector<TokenId>> sample,
                                const IsotropyConfig& cfg) {
  cfg.validate();
  std::map<TokenId, std::vector<std::vector<double>>> contexts;
  for (const auto& seq : sample) {
    if (seq.empty()) continue;
    const auto hidden = hidden_states(params, std::span<const TokenId>(seq));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] < SpecialTokens::count) continue;
      auto& slot = contexts[seq[i]];
      if (slot.size() >= cfg.max_contexts) continue;
      const auto row = hidden.row(i);
      slot.emplace_back(row.begin(), row.end());
    }
  }
  return isotropy_from_contexts(contexts, cfg);
}

std::vector<std::string> split_words(std::string_view text, std::string_view extra_separators) {
  std::vector<std::string> words;
  std::string current;
  for (const char c : text) {
    const bool sep = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
                     extra_separators.find(c) != std::string_view::npos;
    if (sep) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& words,
                                                             std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                      words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuStats bleu_stats(std::span<const std::vector<std::string>> hypotheses,
                     std::span<const std::vector<std::string>> references, std::size_t max_order) {
  if (hypotheses.size() != references.size()) {
    throw DataError("BLEU needs as many hypotheses as references");
  }
  if (hypotheses.empty()) throw DataError("BLEU needs a non-empty corpus");
  if (max_order < 1) throw ConfigError("BLEU order must be >= 1");
  BleuStats stats;
  stats.matches.assign(max_order, 0);
  stats.totals.assign(max_order, 0);
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    stats.hypothesis_length += hypotheses[s].size();
    stats.reference_length += references[s].size();
    for (std::size_t n = 1; n <= max_order; ++n) {
      const auto hyp = ngram_counts(hypotheses[s], n);
      const auto ref = ngram_counts(references[s], n);
      for (const auto& [gram, count] : hyp) {
        stats.totals[n - 1] += count;
        const auto it = ref.find(gram);
        if (it != ref.end()) stats.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  return stats;
}

double bleu(std::span<const std::vector<std::string>> hypotheses,
            std::span<const std::vector<std::string>> references, const BleuOptions& options) {
  const auto stats = bleu_stats(hypotheses, references, options.max_order);
  if (stats.hypothesis_length == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < options.max_order; ++n) {
    double matches = static_cast<double>(stats.matches[n]);
    const double total = static_cast<double>(stats.totals[n]);
    if (matches == 0.0) {
      if (options.smoothing_epsilon <= 0.0) return 0.0;
      matches = options.smoothing_epsilon;
    }
    log_sum += std::log(matches / std::max(total, 1.0));
  }
  const double c = static_cast<double>(stats.hypothesis_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(options.max_order)), 0.0, 1.0);
}

std::string_view translation_system_prompt() noexcept {
  return "You are a large language model trained to solve multiple NLP tasks accurately. For any "
         "given NLP task, you must produce an output that is factually correct and succinct.";
}

std::string ordinal(std::size_t n) {
  const std::size_t mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

ChatExample build_translation_prompt(std::string_view source_name, std::string_view target_name,
                                     std::span<const ParallelPair> exemplars,
                                     std::string_view query) {
  std::string user = "The task is to translate the given sentence in ";
  user += source_name;
  user += " to language ";
  user += target_name;
  user += ". There are " + std::to_string(exemplars.size()) +
          " examples provided below. Produce the translation of the " +
          ordinal(exemplars.size() + 1) + " sentence:\n\n";
  for (const auto& ex : exemplars) {
    user += std::string(source_name) + ": " + ex.source + "\n";
    user += std::string(target_name) + ": " + ex.target + "\n\n";
  }
  user += std::string(source_name) + ": " + std::string(query) + "\n";
  user += std::string(target_name) + ":\n\n";
  return ChatExample{std::string(translation_system_prompt()), std::move(user), ""};
}

std::string generate_reply(const ModelParameters& params, const TokenizerModel& tokenizer,
                           const ChatExample& prompt, std::size_t max_new_tokens) {
  ChatExample query = prompt;
  query.assistant.clear();
  auto ids = format_chat_example(tokenizer, query).ids;
  const std::size_t block = params.config.block_size;
  const std::size_t room = std::min(max_new_tokens, block - 1);
  const std::size_t keep = block - room;
  if (ids.size() > keep) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(keep));
  auto out = generate_greedy(params, std::span<const TokenId>(ids), room, SpecialTokens::im_end);
  const auto stop = std::find_if(out.begin(), out.end(),
                                 [](TokenId t) { return t < SpecialTokens::count; });
  out.erase(stop, out.end());
  std::string text = tokenizer.decode(out);
  if (const auto nl = text.find('\n'); nl != std::string::npos) text.resize(nl);
  return text;
}

TranslationResult translate_eval(const ModelParameters& params, const TokenizerModel& tokenizer,
                                 std::span<const ParallelPair> pairs,
                                 const TranslationOptions& options, const GenerateFn& generate) {
  if (pairs.size() < options.n_shots + 1) {
    throw DataError("language '" + options.target_name + "' has " + std::to_string(pairs.size()) +
                    " parallel pairs; " + std::to_string(options.n_shots + 1) + " needed");
  }
  const auto exemplars = pairs.first(options.n_shots);
  auto queries = pairs.subspan(options.n_shots);
  if (options.max_queries > 0 && queries.size() > options.max_queries) {
    queries = queries.first(options.max_queries);
  }
  TranslationResult result;
  std::vector<std::vector<std::string>> hyp_words;
  std::vector<std::vector<std::string>> ref_words;
  for (const auto& q : queries) {
    const auto prompt =
        build_translation_prompt(options.source_name, options.target_name, exemplars, q.source);
    std::string hyp = generate ? generate(prompt, q)
                               : generate_reply(params, tokenizer, prompt, options.max_new_tokens);
    hyp_words.push_back(split_words(hyp, options.word_separators));
    ref_words.push_back(split_words(q.target, options.word_separators));
    result.hypotheses.push_back(std::move(hyp));
    result.references.push_back(q.target);
  }
  result.bleu = bleu(hyp_words, ref_words, options.bleu);
  return result;
}

namespace {

struct Accumulator {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

ScalarAggregates aggregate_values(const std::map<std::string, double>& values,
                                  const std::map<std::string, LanguageClass>& classes) {
  std::vector<std::string> missing;
  for (const auto& [lang, v] : values) {
    if (!classes.contains(lang)) missing.push_back(lang);
  }
  if (!missing.empty()) {
    std::string msg = "languages without a class:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
  Accumulator acc[3];
  Accumulator all;
  for (const auto& [lang, v] : values) {
    acc[static_cast<int>(classes.at(lang))].add(v);
    all.add(v);
  }
  return ScalarAggregates{acc[static_cast<int>(LanguageClass::pretraining)].mean(),
                          acc[static_cast<int>(LanguageClass::adapting)].mean(),
                          acc[static_cast<int>(LanguageClass::other)].mean(), all.mean()};
}

ClassAggregates aggregate_by_class(const std::map<std::string, LanguageMetrics>& per_language,
                                   const std::map<std::string, LanguageClass>& classes) {
  std::map<std::string, double> ppl;
  std::map<std::string, double> iso;
  std::map<std::string, double> bl;
  for (const auto& [lang, m] : per_language) {
    ppl[lang] = m.perplexity;
    iso[lang] = m.isotropy;
    if (m.bleu) bl[lang] = *m.bleu;
  }
  const auto p = aggregate_values(ppl, classes);
  const auto i = aggregate_values(iso, classes);
  const auto b = aggregate_values(bl, classes);
  ClassAggregates out;
  out.mu_pretraining = {p.mu_pretraining, i.mu_pretraining, b.mu_pretraining};
  out.mu_adapting = {p.mu_adapting, i.mu_adapting, b.mu_adapting};
  out.mu_other = {p.mu_other, i.mu_other, b.mu_other};
  out.mu_overall = {p.mu_overall, i.mu_overall, b.mu_overall};
  return out;
}

void EvalReport::aggregate() {
  std::map<std::string, LanguageMetrics> per_language;
  std::map<std::string, LanguageClass> classes;
  for (const auto& row : rows) {
    if (per_language.contains(row.lang_id)) throw DataError("duplicate report row for " + row.lang_id);
    per_language[row.lang_id] = row.metrics;
    classes[row.lang_id] = row.cls;
  }
  aggregates = aggregate_by_class(per_language, classes);
}

std::vector<std::string> EvalReport::lang_ids() const {
  std::vector<std::string> out;
  for (const auto& row : rows) out.push_back(row.lang_id);
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json means_json(const MetricMeans& m) {
  return json{{"perplexity", optional_json(m.perplexity)},
              {"isotropy", optional_json(m.isotropy)},
              {"bleu", optional_json(m.bleu)}};
}

MetricMeans means_from(const json& j) {
  return MetricMeans{optional_from(j, "perplexity"), optional_from(j, "isotropy"),
                     optional_from(j, "bleu")};
}

std::string num(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

std::string EvalReport::to_json() const {
  json j;
  j["model_tag"] = model_tag;
  j["step"] = step;
  j["languages"] = json::array();
  for (const auto& row : rows) {
    j["languages"].push_back(json{{"lang_id", row.lang_id},
                                  {"class", std::string(to_string(row.cls))},
                                  {"perplexity", row.metrics.perplexity},
                                  {"isotropy", row.metrics.isotropy},
                                  {"bleu", optional_json(row.metrics.bleu)}});
  }
  j["aggregates"] = json{{"mu_pretraining", means_json(aggregates.mu_pretraining)},
                         {"mu_adapting", means_json(aggregates.mu_adapting)},
                         {"mu_other", means_json(aggregates.mu_other)},
                         {"mu_overall", means_json(aggregates.mu_overall)}};
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.model_tag = j.at("model_tag").get<std::string>();
    r.step = j.at("step").get<std::int64_t>();
    for (const auto& row : j.at("languages")) {
      LanguageRow lr;
      lr.lang_id = row.at("lang_id").get<std::string>();
      lr.cls = parse_language_class(row.at("class").get<std::string>());
      lr.metrics.perplexity = row.at("perplexity").get<double>();
      lr.metrics.isotropy = row.at("isotropy").get<double>();
      lr.metrics.bleu = optional_from(row, "bleu");
      r.rows.push_back(std::move(lr));
    }
    const auto& agg = j.at("aggregates");
    r.aggregates.mu_pretraining = means_from(agg.at("mu_pretraining"));
    r.aggregates.mu_adapting = means_from(agg.at("mu_adapting"));
    r.aggregates.mu_other = means_from(agg.at("mu_other"));
    r.aggregates.mu_overall = means_from(agg.at("mu_overall"));
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "lang_id,class,perplexity,isotropy,bleu\n";
  for (const auto& row : rows) {
    out << row.lang_id << ',' << to_string(row.cls) << ',' << num(row.metrics.perplexity) << ','
        << num(row.metrics.isotropy) << ',' << num(row.metrics.bleu) << '\n';
  }
  const std::pair<const char*, const MetricMeans*> blocks[] = {
      {"mu_pretraining", &aggregates.mu_pretraining},
      {"mu_adapting", &aggregates.mu_adapting},
      {"mu_other", &aggregates.mu_other},
      {"mu_overall", &aggregates.mu_overall}};
  for (const auto& [name, m] : blocks) {
    out << name << ",aggregate," << num(m->perplexity) << ',' << num(m->isotropy) << ','
        << num(m->bleu) << '\n';
  }
  return out.str();
}

}  // namespace aflm
