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


#include "aflm/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "aflm/errors.hpp"
#include "aflm/random.hpp"

namespace aflm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;
constexpr std::uint64_t kExpandTag = 0x657870;
constexpr std::uint64_t kChatTag = 0x63686174;

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return mix_seed(seed, 0x100 + static_cast<std::uint64_t>(stage));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::vector<TokenId>> encode_all(const TokenizerModel& tok,
                                             const std::vector<Document>& docs) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(tok.encode(d.text));
  return out;
}

std::vector<Document> documents_of(const std::vector<Document>& docs, const CorpusManifest& manifest,
                                   LanguageClass cls) {
  std::vector<Document> out;
  for (const auto& d : docs) {
    const auto* l = manifest.find(d.lang_id);
    if (l && l->spec.cls == cls) out.push_back(d);
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.text);
  return out;
}

// Runs one stage with logging and a diagnostic checkpoint on divergence.
TrainingState train_with_logs(Stage stage, TrainingState state,
                              const std::vector<TrainingSequence>& data,
                              const TrainingSchedule& schedule, const fs::path& out_dir,
                              CheckpointManifest manifest, const RunOptions& options) {
  std::ofstream log(out_dir / Artifacts::log(stage), std::ios::trunc);
  if (!log) throw IoError("cannot write training log in " + out_dir.string());
  StageHooks hooks;
  hooks.on_log = [&](const LogRecord& r) {
    json j{{"stage", std::string(to_string(r.stage))},
           {"step", r.step},
           {"lr", r.lr},
           {"loss", r.loss},
           {"reset_count", r.reset_count}};
    log << j.dump() << '\n';
    log.flush();
    if (options.progress) {
      char line[160];
      std::snprintf(line, sizeof line, "[%s] step %lld/%lld lr %.3g loss %.4f resets %lld\n",
                    std::string(to_string(r.stage)).c_str(), static_cast<long long>(r.step),
                    static_cast<long long>(schedule.total_steps), r.lr, r.loss,
                    static_cast<long long>(r.reset_count));
      *options.progress << line << std::flush;
    }
  };
  hooks.on_divergence = [&](const TrainingState& last) {
    Checkpoint ck;
    manifest.step = last.step;
    manifest.reset_count = last.reset_count;
    manifest.rng_state = last.rng.state();
    ck.manifest = manifest;
    ck.params = last.params;
    ck.optimizer = last.optimizer;
    try {
      save_checkpoint(ck, out_dir / Artifacts::diverged(stage));
    } catch (const Error&) {
      // The divergence itself is the error worth reporting.
    }
  };
  return run_stage(stage, std::move(state), data, schedule, hooks);
}

Checkpoint finish_checkpoint(CheckpointManifest manifest, const TrainingState& state,
                             bool save_optimizer) {
  Checkpoint ck;
  manifest.step = state.step;
  manifest.reset_count = state.reset_count;
  manifest.rng_state = state.rng.state();
  manifest.model = state.params.config;
  ck.manifest = std::move(manifest);
  ck.params = state.params;
  if (save_optimizer) ck.optimizer = state.optimizer;
  return ck;
}

void progress(const RunOptions& options, const std::string& line) {
  if (options.progress) *options.progress << line << '\n' << std::flush;
}

}  // namespace

std::string Artifacts::checkpoint(Stage stage) { return std::string(to_string(stage)) + ".ckpt"; }
std::string Artifacts::log(Stage stage) { return std::string(to_string(stage)) + ".log.jsonl"; }
std::string Artifacts::diverged(Stage stage) {
  return std::string(to_string(stage)) + ".diverged.ckpt";
}

DirectoryLock::DirectoryLock(const fs::path& dir) : file_(dir / Artifacts::kLock) {
  fs::create_directories(dir);
  std::FILE* f = std::fopen(file_.string().c_str(), "wx");
  if (!f) {
    throw PipelineError("output directory " + dir.string() + " is locked by another stage (remove " +
                        file_.string() + " if no stage is running)");
  }
  std::fclose(f);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

LoadedModel load_model(const fs::path& checkpoint_path) {
  // The manifest names the tokenizer; read it first, then verify.
  const auto bytes = read_text(checkpoint_path);
  Checkpoint ck = deserialize_checkpoint(bytes);
  const auto tok_path = checkpoint_path.parent_path() / ck.manifest.tokenizer_file;
  TokenizerModel tok = TokenizerModel::load(tok_path);
  if (tok.hash() != ck.manifest.tokenizer_hash) {
    throw TokenizerMismatchError("tokenizer " + tok_path.string() + " (hash " + tok.hash() +
                                 ") does not match checkpoint " + checkpoint_path.string() +
                                 " (hash " + ck.manifest.tokenizer_hash + ")");
  }
  if (tok.size() != ck.manifest.model.vocab_size) {
    throw TokenizerMismatchError("tokenizer size differs from the checkpoint vocabulary");
  }
  return LoadedModel{std::move(ck), std::move(tok)};
}

std::string arm_for(const CheckpointManifest& input) {
  if (input.stage == Stage::pretrain) return "Baseline";
  if (input.stage == Stage::adapt) return input.variant == "active_forgetting" ? "AFA" : "BA";
  throw PipelineError("checkpoint is already finetuned");
}

std::vector<ChatExample> load_chat_examples(const fs::path& path) {
  const auto text = read_text(path);
  std::istringstream in(text);
  std::vector<ChatExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ChatExample ex{j.value("system", std::string{}), j.at("user").get<std::string>(),
                     j.at("assistant").get<std::string>()};
      if (ex.assistant.empty()) throw DataError("empty assistant turn");
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed chat record (" +
                      e.what() + ")");
    }
  }
  return out;
}

void save_chat_examples(const std::vector<ChatExample>& examples, const fs::path& path) {
  std::string text;
  for (const auto& ex : examples) {
    text += json{{"system", ex.system}, {"user", ex.user}, {"assistant", ex.assistant}}.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::vector<ChatExample> generate_chat_examples(const CorpusManifest& manifest, std::size_t n,
                                                std::uint64_t seed) {
  const auto* src = manifest.find(manifest.source_language);
  if (!src || !src->spec.synth) {
    throw ConfigError("chat generation needs a synthetic source_language in the manifest");
  }
  const char sep = static_cast<char>(src->spec.synth->alphabet_lo);
  const auto sentences = generate_sentences(src->spec, n, mix_seed(seed, kChatTag), manifest.grammar);
  std::vector<ChatExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (i % 2 == 0) {
      out.push_back({"You are a helpful assistant.", "Repeat: " + s, s});
    } else {
      auto words = split_words(s, std::string(1, sep));
      std::string reversed;
      for (auto it = words.rbegin(); it != words.rend(); ++it) {
        if (!reversed.empty()) reversed += sep;
        reversed += *it;
      }
      out.push_back({"You are a helpful assistant.", "Reverse: " + s, reversed});
    }
  }
  return out;
}

std::vector<std::vector<TokenId>> evaluation_blocks(const std::vector<std::vector<TokenId>>& documents,
                                                    std::size_t block_size, TokenId eos_id,
                                                    std::size_t max_blocks) {
  std::vector<TokenId> stream;
  for (const auto& d : documents) {
    stream.insert(stream.end(), d.begin(), d.end());
    stream.push_back(eos_id);
  }
  std::vector<std::vector<TokenId>> out;
  for (std::size_t pos = 0; pos < stream.size() && out.size() < max_blocks; pos += block_size) {
    const std::size_t len = std::min(block_size, stream.size() - pos);
    if (len < 2) break;
    out.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(pos),
                     stream.begin() + static_cast<std::ptrdiff_t>(pos + len));
  }
  return out;
}

fs::path cmd_pretrain(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  DirectoryLock lock(config.output_dir);
  const auto manifest = CorpusManifest::load(config.corpus_manifest);
  const auto split = split_corpus(materialize_corpus(manifest), manifest.split);
  const auto docs = documents_of(split.train, manifest, LanguageClass::pretraining);
  if (docs.empty()) throw DataError("no pretraining-class training documents in the manifest");

  progress(options, "training base tokenizer on " + std::to_string(docs.size()) + " documents");
  const auto texts = texts_of(docs);
  const TokenizerModel tok = train_bpe(texts, config.tokenizer.base_size);
  tok.save(config.output_dir / Artifacts::kBaseTokenizer);

  ModelConfig mc = config.model;
  mc.vocab_size = tok.size();
  mc.validate();
  const auto blocks = pack_blocks(encode_all(tok, docs), mc.block_size, SpecialTokens::eos);
  if (blocks.blocks.empty()) throw DataError("pretraining corpus is shorter than one block");
  const auto data = sequences_from_blocks(blocks.blocks);

  TrainingSchedule schedule = config.pretrain;
  if (config.variant == Variant::baseline) schedule.reset_interval.reset();
  schedule.seed = stage_seed(config.seed, Stage::pretrain);
  progress(options, "pretraining " + std::to_string(init_model<float>(mc, 0).parameter_count()) +
                        " parameters on " + std::to_string(data.size()) + " blocks");

  CheckpointManifest cm;
  cm.model = mc;
  cm.tokenizer_hash = tok.hash();
  cm.tokenizer_file = Artifacts::kBaseTokenizer;
  cm.stage = Stage::pretrain;
  cm.schedule_json = schedule_to_json(schedule);
  cm.seed = config.seed;
  cm.variant = std::string(to_string(config.variant));
  cm.lineage = {"pretrain"};

  auto state = TrainingState::fresh(init_model<float>(mc, mix_seed(config.seed, kInitTag)),
                                    schedule.seed);
  state = train_with_logs(Stage::pretrain, std::move(state), data, schedule, config.output_dir, cm,
                          options);
  const auto path = config.output_dir / Artifacts::checkpoint(Stage::pretrain);
  save_checkpoint(finish_checkpoint(cm, state, config.save_optimizer), path);
  return path;
}

fs::path cmd_adapt(const PipelineConfig& config, const fs::path& base_checkpoint,
                   const RunOptions& options) {
  config.validate();
  auto base = load_model(base_checkpoint);
  if (base.checkpoint.manifest.stage != Stage::pretrain) {
    throw PipelineError("adapt needs a pretrain checkpoint, got stage '" +
                        std::string(to_string(base.checkpoint.manifest.stage)) + "'");
  }
  DirectoryLock lock(config.output_dir);
  const auto manifest = CorpusManifest::load(config.corpus_manifest);
  const auto split = split_corpus(materialize_corpus(manifest), manifest.split);
  const auto docs = documents_of(split.train, manifest, LanguageClass::adapting);
  if (docs.empty()) throw DataError("no adapting-class training documents in the manifest");

  const auto texts = texts_of(docs);
  const TokenizerModel adapting =
      train_bpe(texts, SpecialTokens::count + 256 + config.tokenizer.adapt_budget);
  const auto merged = merge_vocabularies(base.tokenizer, adapting);
  adapting.save(config.output_dir / Artifacts::kAdaptingTokenizer);
  merged.merged.save(config.output_dir / Artifacts::kMergedTokenizer);
  if (config.output_dir != base_checkpoint.parent_path()) {
    base.tokenizer.save(config.output_dir / Artifacts::kBaseTokenizer);
  }
  progress(options, "merged vocabulary: " + std::to_string(base.tokenizer.size()) + " + " +
                        std::to_string(merged.new_token_ids.size()) + " new tokens");

  const std::size_t base_size = base.checkpoint.params.config.vocab_size;
  auto params = expand_vocab(base.checkpoint.params, merged.merged.size(),
                             mix_seed(config.seed, kExpandTag));
  const auto blocks = pack_blocks(encode_all(merged.merged, docs), params.config.block_size,
                                  SpecialTokens::eos);
  if (blocks.blocks.empty()) throw DataError("adapting corpus is shorter than one block");
  const auto data = sequences_from_blocks(blocks.blocks);

  TrainingSchedule schedule = config.adapt;
  schedule.reset_interval.reset();
  schedule.freeze = FreezeSpec::adaptation(base_size);
  schedule.seed = stage_seed(config.seed, Stage::adapt);

  CheckpointManifest cm = base.checkpoint.manifest;
  cm.tokenizer_hash = merged.merged.hash();
  cm.tokenizer_file = Artifacts::kMergedTokenizer;
  cm.stage = Stage::adapt;
  cm.schedule_json = schedule_to_json(schedule);
  cm.lineage.push_back("adapt");

  auto state = TrainingState::fresh(std::move(params), schedule.seed);
  state = train_with_logs(Stage::adapt, std::move(state), data, schedule, config.output_dir, cm,
                          options);
  const auto path = config.output_dir / Artifacts::checkpoint(Stage::adapt);
  save_checkpoint(finish_checkpoint(cm, state, config.save_optimizer), path);
  return path;
}

fs::path cmd_finetune(const PipelineConfig& config, const fs::path& checkpoint,
                      const RunOptions& options) {
  config.validate();
  if (!config.chat.data) throw ConfigError("finetune.chat_data: required for finetuning");
  auto input = load_model(checkpoint);
  const std::string arm = arm_for(input.checkpoint.manifest);
  DirectoryLock lock(config.output_dir);

  const auto examples = load_chat_examples(*config.chat.data);
  std::vector<TrainingSequence> data;
  std::size_t dropped = 0;
  const std::size_t block = input.checkpoint.params.config.block_size;
  for (const auto& ex : examples) {
    auto seq = format_chat_example(input.tokenizer, ex);
    if (seq.ids.size() > block) {
      ++dropped;
      continue;
    }
    data.push_back(std::move(seq));
  }
  if (dropped > 0) {
    progress(options, "skipped " + std::to_string(dropped) + " chat examples longer than " +
                          std::to_string(block) + " tokens");
  }
  if (data.empty()) throw DataError("no chat example fits the model context");

  TrainingSchedule schedule = config.finetune;
  schedule.reset_interval.reset();
  schedule.freeze = FreezeSpec{};
  schedule.seed = stage_seed(config.seed, Stage::finetune);
  const double steps = std::ceil(config.chat.epochs * static_cast<double>(data.size()) /
                                 static_cast<double>(schedule.batch_size));
  const auto total = static_cast<std::int64_t>(steps);

  if (config.output_dir != checkpoint.parent_path()) {
    input.tokenizer.save(config.output_dir / input.checkpoint.manifest.tokenizer_file);
  }
  CheckpointManifest cm = input.checkpoint.manifest;
  cm.stage = Stage::finetune;
  cm.arm = arm;
  cm.lineage.push_back("finetune");

  auto state = TrainingState::fresh(input.checkpoint.params, schedule.seed);
  if (total > 0) {
    schedule.total_steps = total;
    cm.schedule_json = schedule_to_json(schedule);
    state = train_with_logs(Stage::finetune, std::move(state), data, schedule, config.output_dir,
                            cm, options);
  } else {
    cm.schedule_json = schedule_to_json(schedule);
    progress(options, "0 finetuning steps; parameters unchanged");
  }
  const auto path = config.output_dir / Artifacts::checkpoint(Stage::finetune);
  save_checkpoint(finish_checkpoint(cm, state, config.save_optimizer), path);
  return path;
}

EvalReport cmd_eval(const PipelineConfig& config, const fs::path& checkpoint, const fs::path& out_dir,
                    const RunOptions& options) {
  config.validate();
  const auto model = load_model(checkpoint);
  const auto& params = model.checkpoint.params;
  const auto manifest = CorpusManifest::load(config.corpus_manifest);
  const auto split = split_corpus(materialize_corpus(manifest), manifest.split);

  std::map<std::string, std::vector<Document>> held_out;
  for (const auto& d : split.validation) held_out[d.lang_id].push_back(d);

  EvalReport report;
  const auto& cm = model.checkpoint.manifest;
  report.model_tag = !cm.arm.empty() ? cm.arm : std::string(to_string(cm.stage)) + ":" + cm.variant;
  report.step = cm.step;

  std::vector<std::string> missing;
  std::vector<std::pair<const LanguageSource*, std::vector<std::vector<TokenId>>>> work;
  for (const auto& lang : manifest.languages) {
    const auto it = held_out.find(lang.spec.lang_id);
    std::vector<std::vector<TokenId>> blocks;
    if (it != held_out.end()) {
      blocks = evaluation_blocks(encode_all(model.tokenizer, it->second), params.config.block_size,
                                 SpecialTokens::eos, config.eval.max_blocks);
    }
    if (blocks.empty()) {
      missing.push_back(lang.spec.lang_id);
    } else {
      work.emplace_back(&lang, std::move(blocks));
    }
  }
  if (!missing.empty()) {
    std::string msg = "no held-out evaluation data for:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }

  for (const auto& [lang, blocks] : work) {
    LanguageRow row;
    row.lang_id = lang->spec.lang_id;
    row.cls = lang->spec.cls;
    row.metrics.perplexity = perplexity(params, blocks);
    try {
      row.metrics.isotropy = isotropy_self_similarity(params, blocks, config.eval.isotropy);
    } catch (const DataError& e) {
      throw DataError("isotropy for '" + row.lang_id + "': " + e.what());
    }
    if (config.eval.translation && row.lang_id != manifest.source_language) {
      const auto pairs = load_parallel_pairs(manifest, *lang);
      if (!pairs.empty()) {
        TranslationOptions topt;
        topt.n_shots = config.eval.n_shots;
        topt.max_queries = config.eval.max_queries;
        topt.max_new_tokens = config.eval.max_new_tokens;
        topt.source_name = manifest.source_language.empty() ? "English" : manifest.source_language;
        topt.target_name = row.lang_id;
        topt.word_separators = lang->bleu_separators();
        topt.bleu.smoothing_epsilon = config.eval.bleu_smoothing;
        row.metrics.bleu = translate_eval(params, model.tokenizer, pairs, topt).bleu;
      }
    }
    if (options.progress) {
      char line[200];
      std::snprintf(line, sizeof line, "[eval] %s (%s): perplexity %.4f isotropy %.4f bleu %s\n",
                    row.lang_id.c_str(), std::string(to_string(row.cls)).c_str(),
                    row.metrics.perplexity, row.metrics.isotropy,
                    row.metrics.bleu ? std::to_string(*row.metrics.bleu).c_str() : "-");
      *options.progress << line << std::flush;
    }
    report.rows.push_back(std::move(row));
  }
  report.aggregate();
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report.to_json());
  write_text(out_dir / "report.csv", report.to_csv());
  return report;
}

ComparisonTable cmd_compare(std::span<const fs::path> reports, const fs::path& out_dir) {
  std::vector<EvalReport> loaded;
  for (const auto& p : reports) loaded.push_back(EvalReport::from_json(read_text(p)));
  const auto table = compare_reports(loaded);
  fs::create_directories(out_dir);
  write_text(out_dir / "comparison.csv", table.to_csv());
  write_text(out_dir / "comparison.md", table.to_markdown());
  for (const char* metric : {"perplexity", "isotropy", "bleu"}) {
    write_text(out_dir / (std::string("chart_") + metric + ".svg"), bar_chart_svg(table, metric));
  }
  return table;
}

fs::path cmd_gen_corpus(const CorpusManifest& manifest, const fs::path& out_dir,
                        std::size_t chat_examples, std::uint64_t seed) {
  manifest.validate();
  fs::create_directories(out_dir);
  const auto docs = materialize_corpus(manifest);
  CorpusManifest written;
  written.split = manifest.split;
  written.seed = manifest.seed;
  written.grammar = manifest.grammar;
  written.source_language = manifest.source_language;
  for (const auto& lang : manifest.languages) {
    std::string text;
    for (const auto& d : docs) {
      if (d.lang_id != lang.spec.lang_id) continue;
      if (d.text.find("\n\n") != std::string::npos) {
        throw DataError("document " + d.doc_id + " contains a blank line and cannot be a record");
      }
      if (!text.empty()) text += "\n\n";
      text += d.text;
    }
    const auto file = lang.spec.lang_id + ".txt";
    write_text(out_dir / file, text + "\n");
    LanguageSource out;
    out.spec.lang_id = lang.spec.lang_id;
    out.spec.cls = lang.spec.cls;
    out.path = file;
    out.split_records = true;
    out.word_separators = lang.bleu_separators();
    const auto pairs = load_parallel_pairs(manifest, lang);
    if (!pairs.empty()) {
      std::string jsonl;
      for (const auto& p : pairs) jsonl += json{{"source", p.source}, {"target", p.target}}.dump() + "\n";
      const auto pfile = "parallel/" + lang.spec.lang_id + ".jsonl";
      write_text(out_dir / pfile, jsonl);
      out.parallel_path = pfile;
    }
    written.languages.push_back(std::move(out));
  }
  if (chat_examples > 0) {
    save_chat_examples(generate_chat_examples(manifest, chat_examples, seed), out_dir / "chat.jsonl");
  }
  const auto manifest_path = out_dir / "manifest.json";
  write_text(manifest_path, written.to_json() + "\n");
  return manifest_path;
}

}  // namespace aflm
