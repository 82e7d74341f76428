// Copyright 2026 The lfm-forge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lfm/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfm/error.hpp"
#include "lfm/kernels.hpp"

namespace lfm {
namespace {

std::string layer_prefix(std::size_t i) { return "layers." + std::to_string(i) + "."; }

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

float sigmoid(float u) { return 1.0f / (1.0f + std::exp(-u)); }

}  // namespace

std::vector<ParamSpec> parameter_specs(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.d_model;
  std::vector<ParamSpec> specs;
  specs.push_back({"embed", {c.vocab_size, d}});
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string p = layer_prefix(i);
    specs.push_back({p + "op_norm", {d}});
    if (c.is_attention_layer(i)) {
      specs.push_back({p + "attn.q_proj", {d, c.attention_width()}});
      specs.push_back({p + "attn.k_proj", {d, c.kv_width()}});
      specs.push_back({p + "attn.v_proj", {d, c.kv_width()}});
      specs.push_back({p + "attn.o_proj", {c.attention_width(), d}});
      specs.push_back({p + "attn.q_norm", {c.head_size}});
      specs.push_back({p + "attn.k_norm", {c.head_size}});
    } else {
      specs.push_back({p + "conv.in_proj", {d, 3 * d}});
      specs.push_back({p + "conv.kernel", {d, c.conv_kernel}});
      specs.push_back({p + "conv.bias", {d}});
      specs.push_back({p + "conv.out_proj", {d, d}});
    }
    specs.push_back({p + "ffn_norm", {d}});
    if (c.is_moe_layer(i)) {
      const auto& m = *c.moe;
      specs.push_back({p + "moe.router", {d, m.n_experts}});
      specs.push_back({p + "moe.router_bias", {m.n_experts}});
      for (std::size_t e = 0; e < m.n_experts; ++e) {
        const std::string ep = p + "moe.experts." + std::to_string(e) + ".";
        specs.push_back({ep + "gate", {d, m.expert_ff_dim}});
        specs.push_back({ep + "up", {d, m.expert_ff_dim}});
        specs.push_back({ep + "down", {m.expert_ff_dim, d}});
      }
    } else {
      specs.push_back({p + "ffn.gate", {d, c.ff_dim}});
      specs.push_back({p + "ffn.up", {d, c.ff_dim}});
      specs.push_back({p + "ffn.down", {c.ff_dim, d}});
    }
  }
  specs.push_back({"final_norm", {d}});
  if (!c.tie_embeddings) specs.push_back({"lm_head", {d, c.vocab_size}});
  return specs;
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& s : parameter_specs(config)) n += shape_size(s.shape);
  return n;
}

// --- caches ---------------------------------------------------------------

ConvState ConvState::zeros(std::size_t kernel, std::size_t width) {
  ConvState s;
  s.kernel = kernel;
  s.width = width;
  if (kernel > 1) s.window = Tensor({kernel - 1, width});
  return s;
}

std::span<const float> ConvState::past(std::size_t lag) const {
  const std::size_t n = kernel - 1;
  return window.row((head + n - lag) % n);
}

void ConvState::push(std::span<const float> y) {
  if (kernel == 1) return;
  std::copy(y.begin(), y.end(), window.row(head).begin());
  head = (head + 1) % (kernel - 1);
}

std::size_t SessionState::state_bytes() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    std::visit([&](const auto& s) { n += s.bytes(); }, layer);
  }
  return n;
}

// --- blocks ---------------------------------------------------------------

Tensor gated_conv_block(const Tensor& h, const ConvWeights& w, ConvState* state) {
  require_dims(h.rank() == 2, "gated_conv_block: input must be [L, d]");
  const std::size_t len = h.dim(0), d = h.dim(1);
  require_dims(w.in_proj->shape() == Shape{d, 3 * d},
               "gated_conv_block: in_proj must be [d, 3d]");
  require_dims(w.kernel->rank() == 2 && w.kernel->dim(0) == d,
               "gated_conv_block: kernel must be [d, k]");
  require_dims(w.bias->shape() == Shape{d}, "gated_conv_block: bias must be [d]");
  require_dims(w.out_proj->shape() == Shape{d, d},
               "gated_conv_block: out_proj must be [d, d]");
  const std::size_t k = w.kernel->dim(1);
  ConvState local;
  if (state == nullptr) {
    local = ConvState::zeros(k, d);
    state = &local;
  }
  require_dims(state->kernel == k && state->width == d,
               "gated_conv_block: state geometry does not match weights");

  const Tensor proj = matmul(h, *w.in_proj);
  Tensor y({len, d});
  for (std::size_t t = 0; t < len; ++t) {
    auto p = proj.row(t);
    auto yr = y.row(t);
    for (std::size_t c = 0; c < d; ++c) yr[c] = p[c] * p[2 * d + c];
  }

  Tensor gated({len, d});
  const Tensor& kern = *w.kernel;
  const Tensor& bias = *w.bias;
  for (std::size_t t = 0; t < len; ++t) {
    auto p = proj.row(t);
    auto out = gated.row(t);
    for (std::size_t c = 0; c < d; ++c) {
      float acc = bias[c];
      for (std::size_t i = 0; i < k; ++i) {
        const float yv = i <= t ? y.at(t - i, c) : state->past(i - t)[c];
        acc += kern.at(c, i) * yv;
      }
      out[c] = p[d + c] * acc;
    }
  }
  const std::size_t keep = std::min(len, k - 1);
  for (std::size_t t = len - keep; t < len; ++t) state->push(y.row(t));
  return matmul(gated, *w.out_proj);
}

Tensor gqa_block(const Tensor& h, const AttnWeights& w, const AttnGeometry& geo,
                 AttnCache* cache) {
  require_dims(h.rank() == 2, "gqa_block: input must be [L, d]");
  const std::size_t len = h.dim(0), d = h.dim(1);
  const std::size_t n_heads = geo.n_heads, n_groups = geo.n_kv_groups,
                    s = geo.head_size;
  if (n_groups == 0 || n_heads % n_groups != 0) {
    throw ConfigError("gqa_block: n_heads must be divisible by n_kv_groups");
  }
  if (s % 2 != 0) throw ConfigError("gqa_block: head size must be even");
  const std::size_t q_width = n_heads * s, kv_width = n_groups * s;
  require_dims(w.q_proj->shape() == Shape{d, q_width} &&
                   w.k_proj->shape() == Shape{d, kv_width} &&
                   w.v_proj->shape() == Shape{d, kv_width} &&
                   w.o_proj->shape() == Shape{q_width, d} &&
                   w.q_norm->shape() == Shape{s} && w.k_norm->shape() == Shape{s},
               "gqa_block: weight shapes do not match attention geometry");
  AttnCache local;
  if (cache == nullptr) cache = &local;
  if (cache->width == 0) cache->width = kv_width;
  require_dims(cache->width == kv_width, "gqa_block: cache width mismatch");
  const std::size_t start = cache->length;
  if (start + len > geo.context_limit) {
    throw CapacityError("attention cache capacity exceeded: position " +
                        std::to_string(start + len) + " > context limit " +
                        std::to_string(geo.context_limit));
  }

  Tensor q = matmul(h, *w.q_proj);
  Tensor k = matmul(h, *w.k_proj);
  const Tensor v = matmul(h, *w.v_proj);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t hd = 0; hd < n_heads; ++hd) {
      auto seg = q.row(t).subspan(hd * s, s);
      rms_norm_row(seg, w.q_norm->data(), geo.norm_eps, seg);
      rope_rotate_row(seg, start + t, geo.rope_base);
    }
    for (std::size_t g = 0; g < n_groups; ++g) {
      auto seg = k.row(t).subspan(g * s, s);
      rms_norm_row(seg, w.k_norm->data(), geo.norm_eps, seg);
      rope_rotate_row(seg, start + t, geo.rope_base);
    }
  }
  if (cache->keys.capacity() < (start + len) * kv_width) {
    const std::size_t want = std::max(start + len, std::min(geo.context_limit, 2 * (start + len)));
    cache->keys.reserve(want * kv_width);
    cache->values.reserve(want * kv_width);
  }
  cache->keys.insert(cache->keys.end(), k.data().begin(), k.data().end());
  cache->values.insert(cache->values.end(), v.data().begin(), v.data().end());
  cache->length = start + len;

  Tensor mixed({len, q_width});
  const float scale = 1.0f / std::sqrt(float(s));
  const std::size_t per_group = n_heads / n_groups;
  const float* keys = cache->keys.data();
  const float* vals = cache->values.data();
  const long n_rows = long(len);
#pragma omp parallel for num_threads(kernel_threads()) if (n_rows > 16) schedule(dynamic, 8)
  for (long tl = 0; tl < n_rows; ++tl) {
    const std::size_t t = std::size_t(tl);
    const std::size_t n_keys = start + t + 1;
    std::vector<float> scores(n_keys);
    for (std::size_t hd = 0; hd < n_heads; ++hd) {
      const std::size_t g = hd / per_group;
      const float* qh = q.row(t).data() + hd * s;
      float mx = -INFINITY;
      for (std::size_t j = 0; j < n_keys; ++j) {
        const float* kj = keys + j * kv_width + g * s;
        float dot = 0.0f;
        for (std::size_t c = 0; c < s; ++c) dot += qh[c] * kj[c];
        scores[j] = dot * scale;
        mx = std::max(mx, scores[j]);
      }
      float sum = 0.0f;
      for (std::size_t j = 0; j < n_keys; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        sum += scores[j];
      }
      const float inv = 1.0f / sum;
      float* out = mixed.row(t).data() + hd * s;
      for (std::size_t j = 0; j < n_keys; ++j) {
        const float pj = scores[j] * inv;
        const float* vj = vals + j * kv_width + g * s;
        for (std::size_t c = 0; c < s; ++c) out[c] += pj * vj[c];
      }
    }
  }
  return matmul(mixed, *w.o_proj);
}

Tensor swiglu_ffn(const Tensor& x, const FfnWeights& w) {
  return swiglu(x, *w.gate, *w.up, *w.down);
}

MoEResult moe_ffn(const Tensor& x, const MoEWeights& w) {
  require_dims(x.rank() == 2, "moe_ffn: input must be [L, d]");
  const std::size_t len = x.dim(0), d = x.dim(1);
  require_dims(w.router->rank() == 2 && w.router->dim(0) == d,
               "moe_ffn: router must be [d, E]");
  const std::size_t n_experts = w.router->dim(1);
  if (w.top_k == 0 || w.top_k > n_experts) {
    throw ConfigError("moe_ffn: top_k " + std::to_string(w.top_k) +
                      " outside [1, " + std::to_string(n_experts) + "]");
  }
  require_dims(w.router_bias->shape() == Shape{n_experts} &&
                   w.experts.size() == n_experts,
               "moe_ffn: router bias / expert count mismatch");

  MoEResult res{Tensor({len, d}), Tensor({len, n_experts}),
                std::vector<std::size_t>(n_experts, 0)};
  const Tensor logits = matmul(x, *w.router);
  std::vector<std::size_t> order(n_experts);
  std::vector<float> scores(n_experts), biased(n_experts);
  std::vector<float> gate_buf, up_buf, expert_out(d);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t e = 0; e < n_experts; ++e) {
      scores[e] = sigmoid(logits.at(t, e));
      biased[e] = scores[e] + (*w.router_bias)[e];
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + long(w.top_k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return biased[a] != biased[b] ? biased[a] > biased[b] : a < b;
                      });
    double total = 0.0;
    for (std::size_t r = 0; r < w.top_k; ++r) total += scores[order[r]];
    auto out = res.out.row(t);
    for (std::size_t r = 0; r < w.top_k; ++r) {
      const std::size_t e = order[r];
      const float gate = total > 0.0 ? float(scores[e] / total) : 1.0f / float(w.top_k);
      res.gates.at(t, e) = gate;
      ++res.load[e];
      const FfnWeights& ex = w.experts[e];
      const std::size_t f = ex.gate->dim(1);
      gate_buf.resize(f);
      up_buf.resize(f);
      matvec(x.row(t), *ex.gate, gate_buf);
      matvec(x.row(t), *ex.up, up_buf);
      for (std::size_t i = 0; i < f; ++i) gate_buf[i] = silu(gate_buf[i]) * up_buf[i];
      matvec(gate_buf, *ex.down, expert_out);
      for (std::size_t c = 0; c < d; ++c) out[c] += gate * expert_out[c];
    }
  }
  return res;
}

Tensor update_router_bias(std::span<const std::size_t> load, const Tensor& bias,
                          float gamma) {
  if (!(gamma > 0.0f)) throw DomainError("update_router_bias: gamma must be positive");
  require_dims(bias.rank() == 1 && bias.size() == load.size(),
               "update_router_bias: load and bias lengths differ");
  if (load.empty()) return bias;
  // Compare load_e * E against the total to keep the sign test exact.
  const std::size_t total = std::accumulate(load.begin(), load.end(), std::size_t{0});
  Tensor out = bias;
  for (std::size_t e = 0; e < load.size(); ++e) {
    const std::size_t scaled = load[e] * load.size();
    const float sign = scaled < total ? 1.0f : (scaled > total ? -1.0f : 0.0f);
    out[e] = bias[e] + gamma * sign;
  }
  return out;
}

// --- model ----------------------------------------------------------------

Model::Model(ModelConfig config, Checkpoint params)
    : config_(std::move(config)),
      params_(std::make_shared<const Checkpoint>(std::move(params))) {
  const auto specs = parameter_specs(config_);
  std::vector<std::string> missing, wrong_shape, unexpected;
  for (const auto& s : specs) {
    auto it = params_->find(s.name);
    if (it == params_->end()) {
      missing.push_back(s.name);
    } else if (it->second.shape() != s.shape) {
      wrong_shape.push_back(s.name + " " + shape_string(it->second.shape()) +
                            " (expected " + shape_string(s.shape) + ")");
    }
  }
  if (params_->size() != specs.size() - missing.size()) {
    for (const auto& [name, t] : *params_) {
      if (std::none_of(specs.begin(), specs.end(),
                       [&](const ParamSpec& s) { return s.name == name; })) {
        unexpected.push_back(name);
      }
    }
  }
  if (!missing.empty() || !wrong_shape.empty() || !unexpected.empty()) {
    std::string msg = "checkpoint does not match config '" + config_.name + "'";
    auto list = [&](const char* label, const std::vector<std::string>& names) {
      if (names.empty()) return;
      msg += std::string("; ") + label + ":";
      for (std::size_t i = 0; i < names.size() && i < 10; ++i) msg += " " + names[i];
      if (names.size() > 10) msg += " ... (" + std::to_string(names.size()) + " total)";
    };
    list("missing", missing);
    list("shape mismatch", wrong_shape);
    list("unexpected", unexpected);
    throw CompatibilityError(msg);
  }

  embed_ = &param("embed");
  final_norm_ = &param("final_norm");
  lm_head_ = config_.tie_embeddings ? nullptr : &param("lm_head");
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string p = layer_prefix(i);
    Layer layer;
    layer.op_norm = &param(p + "op_norm");
    layer.ffn_norm = &param(p + "ffn_norm");
    layer.attention = config_.is_attention_layer(i);
    if (layer.attention) {
      layer.attn = {&param(p + "attn.q_proj"), &param(p + "attn.k_proj"),
                    &param(p + "attn.v_proj"), &param(p + "attn.o_proj"),
                    &param(p + "attn.q_norm"), &param(p + "attn.k_norm")};
    } else {
      layer.conv = {&param(p + "conv.in_proj"), &param(p + "conv.kernel"),
                    &param(p + "conv.bias"), &param(p + "conv.out_proj")};
    }
    layer.moe = config_.is_moe_layer(i);
    if (layer.moe) {
      layer.experts.router = &param(p + "moe.router");
      layer.experts.router_bias = &param(p + "moe.router_bias");
      layer.experts.top_k = config_.moe->top_k;
      for (std::size_t e = 0; e < config_.moe->n_experts; ++e) {
        const std::string ep = p + "moe.experts." + std::to_string(e) + ".";
        layer.experts.experts.push_back(
            {&param(ep + "gate"), &param(ep + "up"), &param(ep + "down")});
      }
    } else {
      layer.ffn = {&param(p + "ffn.gate"), &param(p + "ffn.up"), &param(p + "ffn.down")};
    }
    layers_.push_back(std::move(layer));
  }
}

const Tensor& Model::param(std::string_view name) const {
  auto it = params_->find(name);
  if (it == params_->end()) {
    throw CompatibilityError("missing parameter " + std::string(name));
  }
  return it->second;
}

AttnGeometry Model::attention_geometry() const {
  return {config_.n_heads, config_.n_kv_groups, config_.head_size,
          config_.rope_base, config_.norm_eps, config_.context_limit};
}

Model build_model(const ModelConfig& config, RngSeed seed) {
  Checkpoint params;
  for (const auto& spec : parameter_specs(config)) {
    const std::string& n = spec.name;
    auto ends_with = [&](std::string_view suffix) {
      return n.size() >= suffix.size() &&
             n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    Tensor t(spec.shape);
    if (ends_with("norm")) {
      std::fill(t.data().begin(), t.data().end(), 1.0f);
    } else if (ends_with("bias")) {
      // zero
    } else {
      auto gen = stream_for(seed, n);
      // Matrices are [in, out]; conv kernels are [d, k] with fan-in k.
      const double sd = n == "embed"                ? 1.0
                        : ends_with("conv.kernel") ? 1.0 / std::sqrt(double(spec.shape[1]))
                                                   : 1.0 / std::sqrt(double(spec.shape[0]));
      for (float& v : t.data()) v = float(sd * standard_normal(gen));
    }
    params.emplace(n, std::move(t));
  }
  return Model(config, std::move(params));
}

// --- sessions -------------------------------------------------------------

SessionState new_session(const Model& model) {
  const auto& c = model.config();
  SessionState s;
  s.layers.reserve(c.n_layers);
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    if (c.is_attention_layer(i)) {
      AttnCache cache;
      cache.width = c.kv_width();
      s.layers.emplace_back(std::move(cache));
    } else {
      s.layers.emplace_back(ConvState::zeros(c.conv_kernel, c.d_model));
    }
  }
  return s;
}

Tensor forward(const Model& model, std::span<const TokenId> tokens,
               SessionState& state, Tensor* hidden) {
  const auto& c = model.config();
  const std::size_t len = tokens.size();
  if (len == 0) throw InputError("forward: empty token sequence");
  if (state.layers.size() != c.n_layers) {
    throw InputError("forward: session does not belong to this model");
  }
  if (state.position + len > c.context_limit) {
    throw CapacityError("context limit " + std::to_string(c.context_limit) +
                        " exceeded at position " + std::to_string(state.position + len));
  }
  for (std::size_t t = 0; t < len; ++t) {
    if (tokens[t] >= c.vocab_size) {
      throw InputError("token id " + std::to_string(tokens[t]) + " at position " +
                       std::to_string(t) + " is outside the vocabulary of " +
                       std::to_string(c.vocab_size));
    }
  }

  const std::size_t d = c.d_model;
  Tensor h({len, d});
  for (std::size_t t = 0; t < len; ++t) {
    auto src = model.embedding().row(tokens[t]);
    std::copy(src.begin(), src.end(), h.row(t).begin());
  }
  const AttnGeometry geo = model.attention_geometry();
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const auto& layer = model.layers()[i];
    Tensor x = rms_norm(h, *layer.op_norm, c.norm_eps);
    const Tensor mixed =
        layer.attention
            ? gqa_block(x, layer.attn, geo, &std::get<AttnCache>(state.layers[i]))
            : gated_conv_block(x, layer.conv, &std::get<ConvState>(state.layers[i]));
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += mixed[j];
    x = rms_norm(h, *layer.ffn_norm, c.norm_eps);
    const Tensor ffn = layer.moe ? moe_ffn(x, layer.experts).out : swiglu_ffn(x, layer.ffn);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += ffn[j];
  }
  state.position += len;

  Tensor normed = rms_norm(h, model.final_norm(), c.norm_eps);
  Tensor logits;
  if (model.lm_head()) {
    logits = matmul(normed, *model.lm_head());
  } else {
    logits = Tensor({len, c.vocab_size});
    const Tensor& emb = model.embedding();
    for (std::size_t t = 0; t < len; ++t) {
      auto hr = normed.row(t);
      for (std::size_t v = 0; v < c.vocab_size; ++v) {
        auto er = emb.row(v);
        float dot = 0.0f;
        for (std::size_t j = 0; j < d; ++j) dot += hr[j] * er[j];
        logits.at(t, v) = dot;
      }
    }
  }
  if (hidden) *hidden = std::move(normed);
  return logits;
}

PrefillResult prefill(const Model& model, std::span<const TokenId> tokens) {
  PrefillResult r{Tensor(), new_session(model)};
  r.logits = forward(model, tokens, r.state);
  return r;
}

Tensor decode_step(const Model& model, TokenId token, SessionState& state) {
  const TokenId one[1] = {token};
  Tensor logits = forward(model, one, state);
  return logits.reshaped({model.config().vocab_size});
}

Tensor final_hidden(const Model& model, std::span<const TokenId> tokens) {
  SessionState s = new_session(model);
  Tensor hidden;
  forward(model, tokens, s, &hidden);
  return hidden;
}

std::size_t argmax(std::span<const float> row) {
  return std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<TokenId> generate_greedy(const Model& model,
                                     std::span<const TokenId> prompt,
                                     std::size_t n_tokens) {
  std::vector<TokenId> out;
  if (n_tokens == 0) return out;
  auto [logits, state] = prefill(model, prompt);
  TokenId next = TokenId(argmax(logits.row(logits.rows() - 1)));
  out.push_back(next);
  while (out.size() < n_tokens) {
    const Tensor step = decode_step(model, next, state);
    next = TokenId(argmax(step.data()));
    out.push_back(next);
  }
  return out;
}

}  // namespace lfm
