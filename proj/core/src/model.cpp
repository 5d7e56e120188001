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

#include "aflm/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "aflm/errors.hpp"
#include "aflm/random.hpp"

namespace aflm {

void ModelConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0 ||
      vocab_size == 0 || block_size == 0) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (head_dim() % 2 != 0) throw ConfigError("head dimension must be even for rotary encoding");
  if (!(norm_epsilon > 0.0)) throw ConfigError("norm_epsilon must be positive");
  if (!(rope_base > 0.0)) throw ConfigError("rope_base must be positive");
  if (!(init_std >= 0.0)) throw ConfigError("init_std must be non-negative");
}

ModelConfig ModelConfig::preset(std::string_view name) {
  ModelConfig c;
  if (name == "gradcheck") {
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_model = 16;
    c.d_ff = 32;
    c.vocab_size = 300;
    c.block_size = 16;
    c.init_std = 0.1;
  } else if (name == "tiny") {
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_model = 32;
    c.d_ff = 64;
    c.block_size = 32;
  } else if (name == "small") {
    c.n_layers = 4;
    c.n_heads = 4;
    c.d_model = 64;
    c.d_ff = 172;
    c.block_size = 64;
  } else if (name == "desk") {
    // defaults: 4 x 128, ~1M trunk parameters
  } else {
    throw ConfigError("unknown model preset '" + std::string(name) + "'");
  }
  return c;
}

template <typename T>
BasicModelParameters<T> BasicModelParameters<T>::zeros(const ModelConfig& config) {
  config.validate();
  const auto d = config.d_model, f = config.d_ff, v = config.vocab_size;
  BasicModelParameters p;
  p.config = config;
  p.token_embedding = Matrix<T>(v, d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.attention_norm = Matrix<T>(1, d);
    l.wq = Matrix<T>(d, d);
    l.wk = Matrix<T>(d, d);
    l.wv = Matrix<T>(d, d);
    l.wo = Matrix<T>(d, d);
    l.ffn_norm = Matrix<T>(1, d);
    l.w_gate = Matrix<T>(f, d);
    l.w_up = Matrix<T>(f, d);
    l.w_down = Matrix<T>(d, f);
  }
  p.final_norm = Matrix<T>(1, d);
  p.lm_head = Matrix<T>(v, d);
  return p;
}

namespace {

template <typename P, typename Ref>
std::vector<Ref> collect_tensors(P& p) {
  std::vector<Ref> out;
  out.push_back({"tok_embeddings", ParamGroup::embedding, &p.token_embedding});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const auto prefix = "layers." + std::to_string(i) + ".";
    out.push_back({prefix + "attention_norm", ParamGroup::trunk, &l.attention_norm});
    out.push_back({prefix + "attention.wq", ParamGroup::trunk, &l.wq});
    out.push_back({prefix + "attention.wk", ParamGroup::trunk, &l.wk});
    out.push_back({prefix + "attention.wv", ParamGroup::trunk, &l.wv});
    out.push_back({prefix + "attention.wo", ParamGroup::trunk, &l.wo});
    out.push_back({prefix + "ffn_norm", ParamGroup::trunk, &l.ffn_norm});
    out.push_back({prefix + "feed_forward.w_gate", ParamGroup::trunk, &l.w_gate});
    out.push_back({prefix + "feed_forward.w_up", ParamGroup::trunk, &l.w_up});
    out.push_back({prefix + "feed_forward.w_down", ParamGroup::trunk, &l.w_down});
  }
  out.push_back({"norm", ParamGroup::trunk, &p.final_norm});
  out.push_back({"lm_head", ParamGroup::head, &p.lm_head});
  return out;
}

bool is_norm_gain(const std::string& name) {
  return name.ends_with("norm");
}

}  // namespace

template <typename T>
std::vector<TensorRef<T>> BasicModelParameters<T>::tensors() {
  return collect_tensors<BasicModelParameters<T>, TensorRef<T>>(*this);
}

template <typename T>
std::vector<ConstTensorRef<T>> BasicModelParameters<T>::tensors() const {
  return collect_tensors<const BasicModelParameters<T>, ConstTensorRef<T>>(*this);
}

template <typename T>
std::size_t BasicModelParameters<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

template <typename T>
void BasicModelParameters<T>::set_zero() {
  for (auto& t : tensors()) t.tensor->fill(T{0});
}

std::uint64_t init_stream_seed(std::uint64_t seed, std::size_t tensor_index) noexcept {
  return mix_seed(mix_seed(seed, 0x1417), tensor_index);
}

std::uint64_t expansion_stream_seed(std::uint64_t seed, ParamGroup group) noexcept {
  return mix_seed(mix_seed(seed, 0xe8a9d), static_cast<std::uint64_t>(group));
}

template <typename T>
void fill_normal(Matrix<T>& m, double stddev, std::uint64_t stream_seed) {
  if (stddev == 0.0) {
    m.fill(T{0});
    return;
  }
  Rng rng(stream_seed);
  for (auto& x : m.data) x = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
BasicModelParameters<T> init_model(const ModelConfig& config, std::uint64_t seed) {
  auto p = BasicModelParameters<T>::zeros(config);
  auto refs = p.tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (is_norm_gain(refs[i].name)) {
      refs[i].tensor->fill(T{1});
    } else {
      fill_normal(*refs[i].tensor, config.init_std, init_stream_seed(seed, i));
    }
  }
  return p;
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<RowMat<T>> view(Matrix<T>& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

template <typename T>
Eigen::Map<const RowMat<T>> view(const Matrix<T>& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

template <typename T>
Matrix<T> to_matrix(const RowMat<T>& m) {
  Matrix<T> out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  view(out) = m;
  return out;
}

template <typename T>
struct Rotary {
  RowMat<T> cos, sin;  // positions x head_dim/2

  Rotary(std::size_t n, const ModelConfig& c) {
    const auto half = static_cast<Eigen::Index>(c.head_dim() / 2);
    cos.resize(static_cast<Eigen::Index>(n), half);
    sin.resize(static_cast<Eigen::Index>(n), half);
    for (Eigen::Index pos = 0; pos < cos.rows(); ++pos) {
      for (Eigen::Index j = 0; j < half; ++j) {
        const double freq =
            std::pow(c.rope_base, -2.0 * static_cast<double>(j) / static_cast<double>(c.head_dim()));
        const double angle = static_cast<double>(pos) * freq;
        cos(pos, j) = static_cast<T>(std::cos(angle));
        sin(pos, j) = static_cast<T>(std::sin(angle));
      }
    }
  }

  // Rotates interleaved pairs of every head in place; inverse=true applies
  // the transpose (used for gradients).
  void apply(RowMat<T>& x, std::size_t n_heads, bool inverse) const {
    const auto half = cos.cols();
    const auto hd = 2 * half;
    for (Eigen::Index pos = 0; pos < x.rows(); ++pos) {
      for (std::size_t h = 0; h < n_heads; ++h) {
        T* row = x.data() + pos * x.cols() + static_cast<Eigen::Index>(h) * hd;
        for (Eigen::Index j = 0; j < half; ++j) {
          const T c = cos(pos, j);
          const T s = inverse ? -sin(pos, j) : sin(pos, j);
          const T x0 = row[2 * j], x1 = row[2 * j + 1];
          row[2 * j] = x0 * c - x1 * s;
          row[2 * j + 1] = x0 * s + x1 * c;
        }
      }
    }
  }
};

template <typename T>
void rmsnorm_forward(const RowMat<T>& x, const Matrix<T>& gain, T eps, RowMat<T>& y,
                     Vec<T>& inv_rms) {
  const T d = static_cast<T>(x.cols());
  inv_rms = ((x.rowwise().squaredNorm().array() / d) + eps).sqrt().inverse().matrix();
  y = (x.array().colwise() * inv_rms.array()).rowwise() * view(gain).row(0).array();
}

template <typename T>
void rmsnorm_backward(const RowMat<T>& x, const Vec<T>& inv_rms, const Matrix<T>& gain,
                      const RowMat<T>& dy, RowMat<T>& dx, Matrix<T>& dgain) {
  const T d = static_cast<T>(x.cols());
  view(dgain).row(0) +=
      ((dy.array() * x.array()).colwise() * inv_rms.array()).colwise().sum().matrix();
  const RowMat<T> gy = dy.array().rowwise() * view(gain).row(0).array();
  const Vec<T> dot = (gy.array() * x.array()).rowwise().sum().matrix();
  const Vec<T> coef = (inv_rms.array().cube() * dot.array() / d).matrix();
  dx.array() += gy.array().colwise() * inv_rms.array() - x.array().colwise() * coef.array();
}

template <typename T>
struct LayerCache {
  RowMat<T> x_in;
  Vec<T> inv_rms_attn;
  RowMat<T> a;
  RowMat<T> q, k, v;
  std::vector<RowMat<T>> probs;
  RowMat<T> o;
  RowMat<T> x_mid;
  Vec<T> inv_rms_ffn;
  RowMat<T> m;
  RowMat<T> gate, up, act;
};

template <typename T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  RowMat<T> x_final;
  Vec<T> inv_rms_final;
  RowMat<T> hidden;
};

template <typename T>
void check_input(const BasicModelParameters<T>& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw DataError("empty input sequence");
  if (ids.size() > p.config.block_size) {
    throw DataError("input of " + std::to_string(ids.size()) +
                    " tokens exceeds block_size " + std::to_string(p.config.block_size));
  }
  for (const auto id : ids) {
    if (id >= p.config.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " >= vocab_size " +
                      std::to_string(p.config.vocab_size));
    }
  }
}

template <typename T>
T silu(T z) {
  return z / (T{1} + std::exp(-z));
}

// Runs the trunk and caches every activation needed by the backward pass.
template <typename T>
void forward_trunk(const BasicModelParameters<T>& p, std::span<const TokenId> ids,
                   const Rotary<T>& rope, ForwardCache<T>& cache) {
  const auto& cfg = p.config;
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto hd = static_cast<Eigen::Index>(cfg.head_dim());
  const T eps = static_cast<T>(cfg.norm_epsilon);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  RowMat<T> x(n, d);
  const auto emb = view(p.token_embedding);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = emb.row(ids[static_cast<std::size_t>(i)]);

  cache.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l];
    auto& c = cache.layers[l];
    c.x_in = x;
    rmsnorm_forward(c.x_in, w.attention_norm, eps, c.a, c.inv_rms_attn);
    c.q.noalias() = c.a * view(w.wq).transpose();
    c.k.noalias() = c.a * view(w.wk).transpose();
    c.v.noalias() = c.a * view(w.wv).transpose();
    rope.apply(c.q, cfg.n_heads, false);
    rope.apply(c.k, cfg.n_heads, false);

    c.o.setZero(n, d);
    c.probs.resize(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h) * hd;
      RowMat<T> s = (c.q.middleCols(col, hd) * c.k.middleCols(col, hd).transpose()) * scale;
      auto& prob = c.probs[h];
      prob.setZero(n, n);
      // Row i only ever reads columns 0..i, which keeps the output causal.
      for (Eigen::Index i = 0; i < n; ++i) {
        const T mx = s.row(i).head(i + 1).maxCoeff();
        T sum{0};
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T e = std::exp(s(i, j) - mx);
          prob(i, j) = e;
          sum += e;
        }
        prob.row(i).head(i + 1) /= sum;
      }
      c.o.middleCols(col, hd).noalias() =
          prob.template triangularView<Eigen::Lower>() * c.v.middleCols(col, hd);
    }
    c.x_mid = c.x_in;
    c.x_mid.noalias() += c.o * view(w.wo).transpose();

    rmsnorm_forward(c.x_mid, w.ffn_norm, eps, c.m, c.inv_rms_ffn);
    c.gate.noalias() = c.m * view(w.w_gate).transpose();
    c.up.noalias() = c.m * view(w.w_up).transpose();
    c.act = c.gate.unaryExpr([](T z) { return silu(z); }).array() * c.up.array();
    x = c.x_mid;
    x.noalias() += c.act * view(w.w_down).transpose();
  }
  cache.x_final = std::move(x);
  rmsnorm_forward(cache.x_final, p.final_norm, eps, cache.hidden, cache.inv_rms_final);
}

template <typename T>
void backward_trunk(const BasicModelParameters<T>& p, std::span<const TokenId> ids,
                    const Rotary<T>& rope, const ForwardCache<T>& cache,
                    const RowMat<T>& d_hidden, BasicModelParameters<T>& g) {
  const auto& cfg = p.config;
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto hd = static_cast<Eigen::Index>(cfg.head_dim());
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  RowMat<T> dx = RowMat<T>::Zero(n, d);
  rmsnorm_backward(cache.x_final, cache.inv_rms_final, p.final_norm, d_hidden, dx,
                   g.final_norm);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& w = p.layers[li];
    auto& gw = g.layers[li];
    const auto& c = cache.layers[li];

    // Gated MLP.
    const RowMat<T> d_act = dx * view(w.w_down);
    view(gw.w_down).noalias() += dx.transpose() * c.act;
    const RowMat<T> sig = c.gate.unaryExpr([](T z) { return T{1} / (T{1} + std::exp(-z)); });
    const RowMat<T> d_gate =
        d_act.array() * c.up.array() *
        (sig.array() * (T{1} + c.gate.array() * (T{1} - sig.array())));
    const RowMat<T> d_up = d_act.array() * (c.gate.array() * sig.array());
    view(gw.w_gate).noalias() += d_gate.transpose() * c.m;
    view(gw.w_up).noalias() += d_up.transpose() * c.m;
    RowMat<T> dm = d_gate * view(w.w_gate);
    dm.noalias() += d_up * view(w.w_up);
    rmsnorm_backward(c.x_mid, c.inv_rms_ffn, w.ffn_norm, dm, dx, gw.ffn_norm);

    // Attention.
    const RowMat<T> d_o = dx * view(w.wo);
    view(gw.wo).noalias() += dx.transpose() * c.o;
    RowMat<T> dq = RowMat<T>::Zero(n, d);
    RowMat<T> dk = RowMat<T>::Zero(n, d);
    RowMat<T> dv = RowMat<T>::Zero(n, d);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h) * hd;
      const auto& prob = c.probs[h];
      const auto d_oh = d_o.middleCols(col, hd);
      const RowMat<T> d_prob = d_oh * c.v.middleCols(col, hd).transpose();
      dv.middleCols(col, hd).noalias() = prob.transpose() * d_oh;
      const Vec<T> row_dot = (prob.array() * d_prob.array()).rowwise().sum().matrix();
      const RowMat<T> d_score =
          (prob.array() * (d_prob.array().colwise() - row_dot.array())) * scale;
      dq.middleCols(col, hd).noalias() = d_score * c.k.middleCols(col, hd);
      dk.middleCols(col, hd).noalias() = d_score.transpose() * c.q.middleCols(col, hd);
    }
    rope.apply(dq, cfg.n_heads, true);
    rope.apply(dk, cfg.n_heads, true);
    view(gw.wq).noalias() += dq.transpose() * c.a;
    view(gw.wk).noalias() += dk.transpose() * c.a;
    view(gw.wv).noalias() += dv.transpose() * c.a;
    RowMat<T> da = dq * view(w.wq);
    da.noalias() += dk * view(w.wk);
    da.noalias() += dv * view(w.wv);
    rmsnorm_backward(c.x_in, c.inv_rms_attn, w.attention_norm, da, dx, gw.attention_norm);
  }

  auto d_emb = view(g.token_embedding);
  for (Eigen::Index i = 0; i < n; ++i) d_emb.row(ids[static_cast<std::size_t>(i)]) += dx.row(i);
}

template <typename T>
std::size_t count_targets(std::span<const TokenId> ids, std::span<const std::uint8_t> mask) {
  if (mask.size() != ids.size()) throw DataError("target mask length differs from input length");
  std::size_t n = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) n += mask[i] ? 1 : 0;
  return n;
}

}  // namespace

template <typename T>
ForwardOutput<T> forward_logits(const BasicModelParameters<T>& params,
                                std::span<const TokenId> ids) {
  check_input(params, ids);
  const Rotary<T> rope(ids.size(), params.config);
  ForwardCache<T> cache;
  forward_trunk(params, ids, rope, cache);
  const RowMat<T> logits = cache.hidden * view(params.lm_head).transpose();
  return {to_matrix<T>(logits), to_matrix<T>(cache.hidden)};
}

template <typename T>
Matrix<T> hidden_states(const BasicModelParameters<T>& params, std::span<const TokenId> ids) {
  check_input(params, ids);
  const Rotary<T> rope(ids.size(), params.config);
  ForwardCache<T> cache;
  forward_trunk(params, ids, rope, cache);
  return to_matrix<T>(cache.hidden);
}

template <typename T>
LossSum nll_sum(const BasicModelParameters<T>& params, std::span<const TokenId> ids,
                std::span<const std::uint8_t> target_mask) {
  if (ids.size() < 2) throw DataError("loss needs at least two tokens");
  const auto targets = count_targets<T>(ids, target_mask);
  LossSum result{0.0, targets};
  if (targets == 0) return result;
  const auto out = forward_logits(params, ids);
  const auto logits = view(out.logits);
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    if (!target_mask[i + 1]) continue;
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    const double mx = static_cast<double>(row.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) sum += std::exp(static_cast<double>(row(j)) - mx);
    result.nll_sum += mx + std::log(sum) - static_cast<double>(row(ids[i + 1]));
  }
  return result;
}

template <typename T>
double loss_lm(const BasicModelParameters<T>& params, std::span<const TokenId> ids,
               std::span<const std::uint8_t> target_mask) {
  const auto sum = nll_sum(params, ids, target_mask);
  if (sum.targets == 0) throw DataError("no target positions selected by the mask");
  return sum.nll_sum / static_cast<double>(sum.targets);
}

template <typename T>
LossSum accumulate_gradients(const BasicModelParameters<T>& params,
                             std::span<const TokenId> ids,
                             std::span<const std::uint8_t> target_mask,
                             BasicModelParameters<T>& grads, T scale) {
  if (ids.size() < 2) throw DataError("loss needs at least two tokens");
  const auto targets = count_targets<T>(ids, target_mask);
  check_input(params, ids);
  LossSum result{0.0, targets};
  if (targets == 0) return result;

  const Rotary<T> rope(ids.size(), params.config);
  ForwardCache<T> cache;
  forward_trunk(params, ids, rope, cache);
  RowMat<T> d_logits = cache.hidden * view(params.lm_head).transpose();

  const auto n = static_cast<Eigen::Index>(ids.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = d_logits.row(i);
    const auto target_pos = static_cast<std::size_t>(i) + 1;
    if (target_pos >= ids.size() || !target_mask[target_pos]) {
      row.setZero();
      continue;
    }
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    const T sum = row.sum();
    const auto target = static_cast<Eigen::Index>(ids[target_pos]);
    result.nll_sum += std::log(static_cast<double>(sum)) -
                      std::log(static_cast<double>(row(target)));
    row /= sum;
    row(target) -= T{1};
    row *= scale;
  }

  view(grads.lm_head).noalias() += d_logits.transpose() * cache.hidden;
  const RowMat<T> d_hidden = d_logits * view(params.lm_head);
  backward_trunk(params, ids, rope, cache, d_hidden, grads);
  return result;
}

template <typename T>
BasicModelParameters<T> expand_vocab(const BasicModelParameters<T>& params,
                                     std::size_t merged_size, std::uint64_t seed) {
  const auto old_size = params.config.vocab_size;
  if (merged_size < old_size) {
    throw ConfigError("cannot shrink vocabulary from " + std::to_string(old_size) + " to " +
                      std::to_string(merged_size));
  }
  auto out = params;
  out.config.vocab_size = merged_size;
  const auto d = params.config.d_model;

  Matrix<T> fresh_rows(merged_size - old_size, d);
  fill_normal(fresh_rows, params.config.init_std,
              expansion_stream_seed(seed, ParamGroup::embedding));
  out.token_embedding = Matrix<T>(merged_size, d);
  std::copy(params.token_embedding.data.begin(), params.token_embedding.data.end(),
            out.token_embedding.data.begin());
  std::copy(fresh_rows.data.begin(), fresh_rows.data.end(),
            out.token_embedding.data.begin() + static_cast<std::ptrdiff_t>(old_size * d));

  out.lm_head = Matrix<T>(merged_size, d);
  fill_normal(out.lm_head, params.config.init_std, expansion_stream_seed(seed, ParamGroup::head));
  return out;
}

template <typename T>
std::vector<TokenId> generate_greedy(const BasicModelParameters<T>& params,
                                     std::span<const TokenId> prompt,
                                     std::size_t max_new_tokens, TokenId eos_id) {
  if (prompt.size() > params.config.block_size) {
    throw DataError("prompt exceeds block_size");
  }
  if (prompt.empty()) throw DataError("generation needs a non-empty prompt");
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  std::vector<TokenId> generated;
  while (generated.size() < max_new_tokens) {
    const auto out = forward_logits(params, std::span<const TokenId>(context));
    const auto last = out.logits.row(out.logits.rows - 1);
    TokenId best = 0;
    for (std::size_t j = 1; j < last.size(); ++j) {
      if (last[j] > last[best]) best = static_cast<TokenId>(j);
    }
    generated.push_back(best);
    if (best == eos_id || context.size() == params.config.block_size) break;
    context.push_back(best);
  }
  return generated;
}

#define AFLM_INSTANTIATE_MODEL(T)                                                          \
  template struct BasicModelParameters<T>;                                                 \
  template void fill_normal<T>(Matrix<T>&, double, std::uint64_t);                         \
  template BasicModelParameters<T> init_model<T>(const ModelConfig&, std::uint64_t);       \
  template ForwardOutput<T> forward_logits<T>(const BasicModelParameters<T>&,              \
                                              std::span<const TokenId>);                   \
  template Matrix<T> hidden_states<T>(const BasicModelParameters<T>&,                      \
                                      std::span<const TokenId>);                           \
  template LossSum nll_sum<T>(const BasicModelParameters<T>&, std::span<const TokenId>,     \
                              std::span<const std::uint8_t>);                              \
  template double loss_lm<T>(const BasicModelParameters<T>&, std::span<const TokenId>,     \
                             std::span<const std::uint8_t>);                               \
  template LossSum accumulate_gradients<T>(const BasicModelParameters<T>&,                 \
                                           std::span<const TokenId>,                       \
                                           std::span<const std::uint8_t>,                  \
                                           BasicModelParameters<T>&, T);                   \
  template BasicModelParameters<T> expand_vocab<T>(const BasicModelParameters<T>&,         \
                                                   std::size_t, std::uint64_t);            \
  template std::vector<TokenId> generate_greedy<T>(const BasicModelParameters<T>&,         \
                                                   std::span<const TokenId>, std::size_t,  \
                                                   TokenId);

AFLM_INSTANTIATE_MODEL(float)
AFLM_INSTANTIATE_MODEL(double)

#undef AFLM_INSTANTIATE_MODEL

}  // namespace aflm
