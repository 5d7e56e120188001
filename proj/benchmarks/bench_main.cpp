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


#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "aflm/corpus.hpp"
#include "aflm/model.hpp"
#include "aflm/tokenizer.hpp"
#include "aflm/training.hpp"

namespace {

aflm::LanguageSpec bench_language() {
  aflm::LanguageSpec spec;
  spec.lang_id = "bench";
  spec.synth = aflm::SynthParams{};
  return spec;
}

void BM_TrainBpe(benchmark::State& state) {
  const auto docs = aflm::generate_synthetic_corpus(bench_language(), 200, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(aflm::train_bpe(docs, static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_TrainBpe)->Arg(300)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const auto docs = aflm::generate_synthetic_corpus(bench_language(), 200, 1);
  const auto tok = aflm::train_bpe(docs, 512);
  std::size_t bytes = 0;
  for (auto _ : state) {
    for (const auto& d : docs) {
      benchmark::DoNotOptimize(tok.encode(d));
      bytes += d.size();
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMillisecond);

std::vector<aflm::TokenId> bench_ids(const aflm::ModelConfig& config) {
  std::vector<aflm::TokenId> ids(config.block_size);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<aflm::TokenId>((i * 37 + 11) % config.vocab_size);
  return ids;
}

void BM_Forward(benchmark::State& state) {
  auto config = aflm::ModelConfig::preset("small");
  config.vocab_size = 512;
  const auto params = aflm::init_model<float>(config, 1);
  const auto ids = bench_ids(config);
  for (auto _ : state) benchmark::DoNotOptimize(aflm::forward_logits(params, std::span<const aflm::TokenId>(ids)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ids.size()));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  auto config = aflm::ModelConfig::preset("small");
  config.vocab_size = 512;
  const auto params = aflm::init_model<float>(config, 1);
  auto grads = aflm::ModelParameters::zeros(config);
  const auto ids = bench_ids(config);
  const aflm::TargetMask mask(ids.size(), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(aflm::accumulate_gradients(params, std::span<const aflm::TokenId>(ids),
                                                        std::span<const std::uint8_t>(mask), grads, 1.0f));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ids.size()));
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_AdamwStep(benchmark::State& state) {
  auto config = aflm::ModelConfig::preset("small");
  config.vocab_size = 512;
  auto params = aflm::init_model<float>(config, 1);
  const auto grads = aflm::init_model<float>(config, 2);
  auto opt = aflm::OptimizerState::zeros_like(params);
  const aflm::TrainingSchedule schedule;
  for (auto _ : state) aflm::adamw_step(params, grads, opt, 1e-4, schedule);
}
BENCHMARK(BM_AdamwStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
