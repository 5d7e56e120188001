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

#include "aflm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "aflm/errors.hpp"
#include "aflm/random.hpp"
#include "json.hpp"

namespace aflm {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LanguageClass cls) noexcept {
  switch (cls) {
    case LanguageClass::pretraining:
      return "pretraining";
    case LanguageClass::adapting:
      return "adapting";
    case LanguageClass::other:
      return "other";
  }
  return "other";
}

LanguageClass parse_language_class(std::string_view name) {
  if (name == "pretraining") return LanguageClass::pretraining;
  if (name == "adapting") return LanguageClass::adapting;
  if (name == "other") return LanguageClass::other;
  throw ConfigError("unknown language class '" + std::string(name) + "'");
}

namespace {

std::size_t letter_count(const SynthParams& p) {
  return static_cast<std::size_t>(p.alphabet_hi - p.alphabet_lo) - 1;
}

constexpr std::size_t kMinWordLength = 2;
constexpr std::size_t kMaxWordLength = 5;

double possible_words(std::size_t letters) {
  double total = 0.0;
  for (std::size_t len = kMinWordLength; len <= kMaxWordLength; ++len) {
    total += std::pow(static_cast<double>(letters), static_cast<double>(len));
  }
  return total;
}

struct Transition {
  std::vector<std::size_t> successors;
  std::vector<double> cumulative;  // normalized, last element == 1
};

class ConceptChain {
 public:
  explicit ConceptChain(const Grammar& grammar) : concepts_(grammar.concepts) {
    if (grammar.concepts == 0 || grammar.branching == 0) {
      throw ConfigError("grammar needs at least one concept and one branch");
    }
    Rng rng(mix_seed(grammar.seed, 0xc0ffee));
    table_.resize(grammar.concepts);
    for (auto& t : table_) {
      double total = 0.0;
      for (std::size_t b = 0; b < grammar.branching; ++b) {
        t.successors.push_back(
            static_cast<std::size_t>(rng.uniform_index(grammar.concepts)));
        // Zipf-like preference for the first successors.
        total += 1.0 / static_cast<double>(b + 1);
        t.cumulative.push_back(total);
      }
      for (auto& c : t.cumulative) c /= total;
      t.cumulative.back() = 1.0;
    }
  }

  std::vector<std::size_t> sentence(Rng& rng, std::size_t length) const {
    std::vector<std::size_t> out;
    out.reserve(length);
    std::size_t current = static_cast<std::size_t>(rng.uniform_index(concepts_));
    for (std::size_t i = 0; i < length; ++i) {
      out.push_back(current);
      const auto& t = table_[current];
      const double u = rng.uniform();
      const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
      const auto idx = std::min<std::size_t>(
          static_cast<std::size_t>(std::distance(t.cumulative.begin(), it)),
          t.successors.size() - 1);
      current = t.successors[idx];
    }
    return out;
  }

 private:
  std::size_t concepts_;
  std::vector<Transition> table_;
};

const SynthParams& require_synth(const LanguageSpec& spec) {
  if (!spec.synth) {
    throw ConfigError("language '" + spec.lang_id +
                      "' has no synthetic parameters");
  }
  spec.synth->validate();
  return *spec.synth;
}

class Lexicon {
 public:
  explicit Lexicon(const SynthParams& p) : params_(p) {
    Rng rng(mix_seed(0x1e71c0, p.seed_offset));
    const auto letters = letter_count(p);
    std::set<std::string> seen;
    while (words_.size() < p.lexicon_size) {
      const auto len = kMinWordLength +
                       rng.uniform_index(kMaxWordLength - kMinWordLength + 1);
      std::string w;
      for (std::size_t i = 0; i < len; ++i) {
        w.push_back(static_cast<char>(p.alphabet_lo + 2 + rng.uniform_index(letters)));
      }
      if (seen.insert(w).second) words_.push_back(std::move(w));
    }
  }

  std::string render(const std::vector<std::size_t>& concepts) const {
    std::string out;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
      if (i > 0) out.push_back(static_cast<char>(params_.alphabet_lo));
      out += words_[concepts[i] % words_.size()];
    }
    return out;
  }

  char terminator() const { return static_cast<char>(params_.alphabet_lo + 1); }

 private:
  SynthParams params_;
  std::vector<std::string> words_;
};

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return buf.str();
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
  });
}

std::vector<std::string> split_blank_line_records(std::string_view text) {
  std::vector<std::string> records;
  std::string current;
  bool has_content = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    const auto line = text.substr(pos, end - pos);
    if (is_blank(line)) {
      if (has_content) records.push_back(std::move(current));
      current.clear();
      has_content = false;
    } else {
      if (has_content) current.push_back('\n');
      current.append(line);
      has_content = true;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (has_content) records.push_back(std::move(current));
  return records;
}

std::uint8_t parse_byte(const json& j) {
  long long value = 0;
  if (j.is_number_integer()) {
    value = j.get<long long>();
  } else if (j.is_string()) {
    value = std::stoll(j.get<std::string>(), nullptr, 0);
  } else {
    throw ConfigError("alphabet bounds must be integers or strings like \"0x61\"");
  }
  if (value < 0 || value > 255) throw ConfigError("alphabet bound out of byte range");
  return static_cast<std::uint8_t>(value);
}

std::pair<std::size_t, std::size_t> parse_range(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string(what) + " must be a [min, max] pair");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void SynthParams::validate() const {
  if (alphabet_hi < alphabet_lo || alphabet_hi - alphabet_lo < 3) {
    throw ConfigError("synthetic alphabet needs at least 4 bytes (separator, "
                      "terminator and two letters)");
  }
  if (lexicon_size == 0) throw ConfigError("lexicon_size must be >= 1");
  if (min_sentence_words == 0 || min_sentence_words > max_sentence_words) {
    throw ConfigError("invalid sentence length range");
  }
  if (min_doc_sentences == 0 || min_doc_sentences > max_doc_sentences) {
    throw ConfigError("invalid sentences-per-document range");
  }
  if (possible_words(letter_count(*this)) < static_cast<double>(lexicon_size)) {
    throw ConfigError("alphabet too small for the requested lexicon size");
  }
}

std::vector<std::string> generate_synthetic_corpus(const LanguageSpec& spec,
                                                   std::size_t n_docs,
                                                   std::uint64_t seed,
                                                   const Grammar& grammar) {
  const auto& p = require_synth(spec);
  if (n_docs == 0) throw ConfigError("n_docs must be >= 1");
  const ConceptChain chain(grammar);
  const Lexicon lexicon(p);
  const auto stream = mix_seed(seed, p.seed_offset);
  std::vector<std::string> docs;
  docs.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    Rng rng(mix_seed(stream, d));
    const auto n_sentences = draw_between(rng, p.min_doc_sentences, p.max_doc_sentences);
    std::string doc;
    for (std::size_t s = 0; s < n_sentences; ++s) {
      const auto len = draw_between(rng, p.min_sentence_words, p.max_sentence_words);
      doc += lexicon.render(chain.sentence(rng, len));
      doc.push_back(lexicon.terminator());
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<ParallelPair> generate_parallel_pairs(const LanguageSpec& source,
                                                  const LanguageSpec& target,
                                                  std::size_t n_pairs,
                                                  std::uint64_t seed,
                                                  const Grammar& grammar) {
  const auto& sp = require_synth(source);
  const auto& tp = require_synth(target);
  const ConceptChain chain(grammar);
  const Lexicon src_lex(sp);
  const Lexicon tgt_lex(tp);
  // The concept stream depends only on the seed, so every target language
  // gets the same source sentences.
  Rng rng(mix_seed(seed, 0x9a11e1));
  const auto lo = std::min(sp.min_sentence_words, tp.min_sentence_words);
  const auto hi = std::max(sp.max_sentence_words, tp.max_sentence_words);
  std::vector<ParallelPair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto concepts = chain.sentence(rng, draw_between(rng, lo, hi));
    pairs.push_back({src_lex.render(concepts), tgt_lex.render(concepts)});
  }
  return pairs;
}

std::vector<std::string> generate_sentences(const LanguageSpec& spec,
                                            std::size_t n_sentences,
                                            std::uint64_t seed,
                                            const Grammar& grammar) {
  const auto& p = require_synth(spec);
  const ConceptChain chain(grammar);
  const Lexicon lexicon(p);
  Rng rng(mix_seed(mix_seed(seed, p.seed_offset), 0x5e47));
  std::vector<std::string> out;
  out.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    out.push_back(lexicon.render(
        chain.sentence(rng, draw_between(rng, p.min_sentence_words, p.max_sentence_words))));
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) noexcept {
  std::size_t i = 0;
  const auto n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::vector<Document> ingest_text_corpus(const fs::path& path,
                                         std::string_view lang_id,
                                         const IngestOptions& options) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("no such path: " + path.string());
  std::vector<fs::path> files;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list " + path.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  std::vector<Document> docs;
  for (const auto& file : files) {
    auto text = read_file(file);
    if (!is_valid_utf8(text)) {
      throw DataError("invalid UTF-8 in " + file.string());
    }
    const auto base_id = std::string(lang_id) + "/" + file.filename().string();
    if (!options.split_records) {
      docs.push_back({base_id, std::string(lang_id), std::move(text)});
      continue;
    }
    auto records = split_blank_line_records(text);
    for (std::size_t r = 0; r < records.size(); ++r) {
      docs.push_back({base_id + "#" + std::to_string(r), std::string(lang_id),
                      std::move(records[r])});
    }
  }
  return docs;
}

BlockStream pack_blocks(const std::vector<std::vector<TokenId>>& documents,
                        std::size_t block_size, TokenId eos_id) {
  if (block_size < 2) throw ConfigError("block_size must be >= 2");
  BlockStream stream{block_size, eos_id, {}};
  std::vector<TokenId> current;
  current.reserve(block_size);
  auto push = [&](TokenId id) {
    current.push_back(id);
    if (current.size() == block_size) {
      stream.blocks.push_back(std::move(current));
      current = {};
      current.reserve(block_size);
    }
  };
  for (const auto& doc : documents) {
    for (auto id : doc) push(id);
    push(eos_id);
  }
  return stream;
}

const LanguageSource* CorpusManifest::find(std::string_view lang_id) const noexcept {
  for (const auto& l : languages) {
    if (l.spec.lang_id == lang_id) return &l;
  }
  return nullptr;
}

std::vector<std::string> CorpusManifest::lang_ids() const {
  std::vector<std::string> out;
  for (const auto& l : languages) out.push_back(l.spec.lang_id);
  return out;
}

std::vector<std::string> CorpusManifest::lang_ids(LanguageClass cls) const {
  std::vector<std::string> out;
  for (const auto& l : languages) {
    if (l.spec.cls == cls) out.push_back(l.spec.lang_id);
  }
  return out;
}

void CorpusManifest::validate() const {
  std::vector<std::string> problems;
  if (!(split > 0.0 && split < 1.0)) problems.push_back("split must lie in (0, 1)");
  std::set<std::string> ids;
  for (const auto& l : languages) {
    const auto& id = l.spec.lang_id;
    if (id.empty()) problems.push_back("language with empty lang_id");
    if (!ids.insert(id).second) problems.push_back("duplicate lang_id '" + id + "'");
    if (l.spec.synth && l.path) {
      problems.push_back("language '" + id + "' is both synthetic and file-backed");
    }
    if (!l.spec.synth && !l.path) {
      problems.push_back("language '" + id + "' has neither synthetic params nor a path");
    }
    if (l.spec.synth) {
      try {
        l.spec.synth->validate();
      } catch (const ConfigError& e) {
        problems.push_back("language '" + id + "': " + e.what());
      }
      if (l.n_docs == 0) problems.push_back("language '" + id + "' needs n_docs >= 1");
    }
    if (l.parallel_pairs > 0 && !l.parallel_path) {
      const auto* src = find(source_language);
      if (!src || !src->spec.synth || !l.spec.synth) {
        problems.push_back("language '" + id +
                           "' requests synthetic parallel pairs but it or the "
                           "source language is not synthetic");
      }
    }
  }
  if (!source_language.empty() && !ids.count(source_language)) {
    problems.push_back("source_language '" + source_language + "' is not declared");
  }
  if (!problems.empty()) {
    std::string msg = "invalid corpus manifest:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

CorpusManifest CorpusManifest::parse(std::string_view json_text,
                                     const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  CorpusManifest m;
  try {
    m.split = j.value("split", 0.1);
    m.seed = j.value("seed", std::uint64_t{0});
    m.source_language = j.value("source_language", std::string{});
    if (j.contains("grammar")) {
      const auto& g = j["grammar"];
      m.grammar.concepts = g.value("concepts", m.grammar.concepts);
      m.grammar.branching = g.value("branching", m.grammar.branching);
      m.grammar.seed = g.value("seed", m.grammar.seed);
    }
    for (const auto& lj : j.at("languages")) {
      LanguageSource l;
      l.spec.lang_id = lj.at("lang_id").get<std::string>();
      l.spec.cls = parse_language_class(lj.at("class").get<std::string>());
      l.n_docs = lj.value("n_docs", std::size_t{0});
      l.split_records = lj.value("split_records", false);
      l.parallel_pairs = lj.value("parallel_pairs", std::size_t{0});
      if (lj.contains("path")) l.path = resolve(base_dir, lj["path"].get<std::string>());
      if (lj.contains("parallel_path")) {
        l.parallel_path = resolve(base_dir, lj["parallel_path"].get<std::string>());
      }
      if (lj.contains("word_separators")) {
        for (const auto& b : lj["word_separators"]) {
          l.word_separators.push_back(static_cast<char>(parse_byte(b)));
        }
      }
      if (lj.contains("synthetic")) {
        const auto& sj = lj["synthetic"];
        SynthParams p;
        const auto& alpha = sj.at("alphabet");
        if (!alpha.is_array() || alpha.size() != 2) {
          throw ConfigError("alphabet must be a [lo, hi] pair");
        }
        p.alphabet_lo = parse_byte(alpha[0]);
        p.alphabet_hi = parse_byte(alpha[1]);
        p.lexicon_size = sj.value("lexicon_size", p.lexicon_size);
        if (sj.contains("sentence_words")) {
          std::tie(p.min_sentence_words, p.max_sentence_words) =
              parse_range(sj["sentence_words"], "sentence_words");
        }
        if (sj.contains("doc_sentences")) {
          std::tie(p.min_doc_sentences, p.max_doc_sentences) =
              parse_range(sj["doc_sentences"], "doc_sentences");
        }
        p.seed_offset = sj.value("seed_offset", p.seed_offset);
        l.spec.synth = p;
      }
      m.languages.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

CorpusManifest CorpusManifest::load(const fs::path& path) {
  return parse(read_file(path), path.parent_path());
}

std::string CorpusManifest::to_json() const {
  json j;
  j["split"] = split;
  j["seed"] = seed;
  j["source_language"] = source_language;
  j["grammar"] = {{"concepts", grammar.concepts},
                  {"branching", grammar.branching},
                  {"seed", grammar.seed}};
  j["languages"] = json::array();
  for (const auto& l : languages) {
    json lj;
    lj["lang_id"] = l.spec.lang_id;
    lj["class"] = std::string(to_string(l.spec.cls));
    if (l.n_docs) lj["n_docs"] = l.n_docs;
    if (l.path) lj["path"] = l.path->string();
    if (l.split_records) lj["split_records"] = true;
    if (l.parallel_pairs) lj["parallel_pairs"] = l.parallel_pairs;
    if (l.parallel_path) lj["parallel_path"] = l.parallel_path->string();
    if (!l.word_separators.empty()) {
      lj["word_separators"] = json::array();
      for (const char c : l.word_separators) {
        lj["word_separators"].push_back(static_cast<unsigned char>(c));
      }
    }
    if (l.spec.synth) {
      const auto& p = *l.spec.synth;
      lj["synthetic"] = {
          {"alphabet", {p.alphabet_lo, p.alphabet_hi}},
          {"lexicon_size", p.lexicon_size},
          {"sentence_words", {p.min_sentence_words, p.max_sentence_words}},
          {"doc_sentences", {p.min_doc_sentences, p.max_doc_sentences}},
          {"seed_offset", p.seed_offset}};
    }
    j["languages"].push_back(std::move(lj));
  }
  return j.dump(2);
}

std::string LanguageSource::bleu_separators() const {
  if (spec.synth) {
    return {static_cast<char>(spec.synth->alphabet_lo),
            static_cast<char>(spec.synth->alphabet_lo + 1)};
  }
  return word_separators;
}

bool is_validation_document(std::string_view doc_id, double split) noexcept {
  const double u = static_cast<double>(mix_seed(fnv1a64(doc_id), 0x73706c6974) >> 11) * 0x1.0p-53;
  return u < split;
}

std::vector<Document> materialize_corpus(const CorpusManifest& manifest) {
  std::vector<Document> docs;
  for (const auto& l : manifest.languages) {
    if (l.spec.synth) {
      auto texts = generate_synthetic_corpus(l.spec, l.n_docs, manifest.seed,
                                             manifest.grammar);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        char idx[32];
        std::snprintf(idx, sizeof idx, "%06zu", i);
        docs.push_back({l.spec.lang_id + "/" + idx, l.spec.lang_id, std::move(texts[i])});
      }
    } else {
      auto ingested = ingest_text_corpus(*l.path, l.spec.lang_id,
                                         IngestOptions{l.split_records});
      std::move(ingested.begin(), ingested.end(), std::back_inserter(docs));
    }
  }
  return docs;
}

CorpusSplit split_corpus(const std::vector<Document>& documents, double split) {
  CorpusSplit out;
  for (const auto& d : documents) {
    (is_validation_document(d.doc_id, split) ? out.validation : out.train).push_back(d);
  }
  return out;
}

std::vector<ParallelPair> load_parallel_pairs(const CorpusManifest& manifest,
                                              const LanguageSource& language) {
  std::vector<ParallelPair> pairs;
  if (language.parallel_path) {
    const auto text = read_file(*language.parallel_path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      try {
        const auto j = json::parse(line);
        pairs.push_back({j.at("source").get<std::string>(),
                         j.at("target").get<std::string>()});
      } catch (const json::exception& e) {
        throw DataError(language.parallel_path->string() + ":" +
                        std::to_string(line_no) + ": " + e.what());
      }
    }
    return pairs;
  }
  if (language.parallel_pairs == 0) return pairs;
  const auto* src = manifest.find(manifest.source_language);
  if (!src) throw ConfigError("manifest has no source_language for parallel pairs");
  return generate_parallel_pairs(src->spec, language.spec, language.parallel_pairs,
                                 mix_seed(manifest.seed, 0x7a2), manifest.grammar);
}

}  // namespace aflm
