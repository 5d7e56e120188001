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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aflm/tensor.hpp"
#include "aflm/types.hpp"

namespace aflm {

// Hyperparameters of a pre-norm decoder (RMSNorm, rotary positions, gated
// SiLU MLP, untied embedding and LM head).
struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 344;
  std::size_t vocab_size = 260;
  std::size_t block_size = 128;
  double norm_epsilon = 1e-5;
  double rope_base = 10000.0;
  double init_std = 0.02;

  std::size_t head_dim() const noexcept { return d_model / n_heads; }
  // Throws ConfigError.
  void validate() const;

  // "gradcheck" (2 layers, d_model 16, vocab 300), "tiny", "small", "desk".
  static ModelConfig preset(std::string_view name);

  bool operator==(const ModelConfig&) const = default;
};

enum class ParamGroup { embedding, head, trunk };

template <typename T>
struct LayerWeights {
  Matrix<T> attention_norm;  // 1 x d
  Matrix<T> wq, wk, wv, wo;  // d x d, stored [out x in]
  Matrix<T> ffn_norm;        // 1 x d
  Matrix<T> w_gate, w_up;    // d_ff x d
  Matrix<T> w_down;          // d x d_ff
};

template <typename T>
struct TensorRef {
  std::string name;
  ParamGroup group;
  Matrix<T>* tensor;
};

template <typename T>
struct ConstTensorRef {
  std::string name;
  ParamGroup group;
  const Matrix<T>* tensor;
};

template <typename T>
struct BasicModelParameters {
  ModelConfig config;
  Matrix<T> token_embedding;  // vocab x d
  std::vector<LayerWeights<T>> layers;
  Matrix<T> final_norm;  // 1 x d
  Matrix<T> lm_head;     // vocab x d

  // Correctly shaped, zero-filled (norm gains included). Also serves as a
  // gradient buffer.
  static BasicModelParameters zeros(const ModelConfig& config);

  // Fixed order: embedding, per-layer tensors, final norm, head.
  std::vector<TensorRef<T>> tensors();
  std::vector<ConstTensorRef<T>> tensors() const;

  std::size_t parameter_count() const;
  void set_zero();
};

using ModelParameters = BasicModelParameters<float>;

template <typename T>
struct ForwardOutput {
  Matrix<T> logits;  // seq_len x vocab
  Matrix<T> hidden;  // seq_len x d_model, after the final norm
};

// Per-position target selector: entry i marks ids[i] as a prediction target.
using TargetMask = std::vector<std::uint8_t>;

struct LossSum {
  double nll_sum = 0.0;
  std::size_t targets = 0;
};

// Fills with Normal(0, stddev^2) draws from a stream seeded by `stream_seed`.
template <typename T>
void fill_normal(Matrix<T>& m, double stddev, std::uint64_t stream_seed);

template <typename T>
BasicModelParameters<T> init_model(const ModelConfig& config, std::uint64_t seed);

// Throws DataError on empty or overlong input or an out-of-range ID.
template <typename T>
ForwardOutput<T> forward_logits(const BasicModelParameters<T>& params,
                                std::span<const TokenId> ids);

template <typename T>
Matrix<T> hidden_states(const BasicModelParameters<T>& params,
                        std::span<const TokenId> ids);

// Sum of target NLLs (nats) and the target count; zero targets is not an
// error here.
template <typename T>
LossSum nll_sum(const BasicModelParameters<T>& params, std::span<const TokenId> ids,
                std::span<const std::uint8_t> target_mask);

// Mean next-token NLL (nats) over positions i with mask[i + 1].
template <typename T>
double loss_lm(const BasicModelParameters<T>& params, std::span<const TokenId> ids,
               std::span<const std::uint8_t> target_mask);

// Adds scale * d(sum of target NLLs)/d(params) into `grads`.
template <typename T>
LossSum accumulate_gradients(const BasicModelParameters<T>& params,
                             std::span<const TokenId> ids,
                             std::span<const std::uint8_t> target_mask,
                             BasicModelParameters<T>& grads, T scale);

// Grows the vocabulary to merged_size: old embedding rows and the trunk are
// kept bit-exactly, new rows and the whole LM head are freshly drawn.
template <typename T>
BasicModelParameters<T> expand_vocab(const BasicModelParameters<T>& params,
                                     std::size_t merged_size, std::uint64_t seed);

// Greedy decoding (lowest ID wins ties). Stops after emitting eos_id, after
// max_new_tokens, or when the context reaches block_size.
template <typename T>
std::vector<TokenId> generate_greedy(const BasicModelParameters<T>& params,
                                     std::span<const TokenId> prompt,
                                     std::size_t max_new_tokens, TokenId eos_id);

template <typename To, typename From>
BasicModelParameters<To> convert_parameters(const BasicModelParameters<From>& params) {
  BasicModelParameters<To> out = BasicModelParameters<To>::zeros(params.config);
  auto dst = out.tensors();
  auto src = params.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < src[i].tensor->size(); ++k) {
      dst[i].tensor->data[k] = static_cast<To>(src[i].tensor->data[k]);
    }
  }
  return out;
}

// Stream seeds, exposed so that tests can regenerate draws independently.
std::uint64_t init_stream_seed(std::uint64_t seed, std::size_t tensor_index) noexcept;
std::uint64_t expansion_stream_seed(std::uint64_t seed, ParamGroup group) noexcept;

}  // namespace aflm
