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

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lfm/checkpoint.hpp"
#include "lfm/config.hpp"
#include "lfm/rng.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

using TokenId = std::uint32_t;

struct ParamSpec {
  std::string name;
  Shape shape;
};

// Every tensor a config requires, with its exact shape.
std::vector<ParamSpec> parameter_specs(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

// Weight views for the individual blocks. Pointers reference tensors owned
// elsewhere (normally a Model's checkpoint).

// (B, C, h~) = h W_in; y = B * h~; z = conv_k(y); o = (C * z) W_out.
// in_proj is [d, 3d] with output columns ordered B, C, h~.
struct ConvWeights {
  const Tensor* in_proj = nullptr;   // [d, 3d]
  const Tensor* kernel = nullptr;    // [d, k]
  const Tensor* bias = nullptr;      // [d]
  const Tensor* out_proj = nullptr;  // [d, d]
};

struct AttnWeights {
  const Tensor* q_proj = nullptr;  // [d, H*s]
  const Tensor* k_proj = nullptr;  // [d, G*s]
  const Tensor* v_proj = nullptr;  // [d, G*s]
  const Tensor* o_proj = nullptr;  // [H*s, d]
  const Tensor* q_norm = nullptr;  // [s]
  const Tensor* k_norm = nullptr;  // [s]
};

struct AttnGeometry {
  std::size_t n_heads = 1;
  std::size_t n_kv_groups = 1;
  std::size_t head_size = 2;
  float rope_base = 10000.0f;
  float norm_eps = 1e-5f;
  std::size_t context_limit = 4096;
};

struct FfnWeights {
  const Tensor* gate = nullptr;  // [d, f]
  const Tensor* up = nullptr;    // [d, f]
  const Tensor* down = nullptr;  // [f, d]
};

struct MoEWeights {
  const Tensor* router = nullptr;       // [d, E]
  const Tensor* router_bias = nullptr;  // [E], selection only
  std::vector<FfnWeights> experts;
  std::size_t top_k = 1;
};

// Last k-1 post-gate vectors of a conv layer, oldest first starting at head.
struct ConvState {
  Tensor window;  // [k-1, d]; empty when k == 1
  std::size_t head = 0;
  std::size_t kernel = 1;
  std::size_t width = 0;

  static ConvState zeros(std::size_t kernel, std::size_t width);
  // Vector produced `lag` steps ago (lag in [1, k-1]).
  std::span<const float> past(std::size_t lag) const;
  void push(std::span<const float> y);
  std::size_t bytes() const { return (kernel - 1) * width * sizeof(float); }
};

// Rotated, normalized keys and raw values per position, [length, G*s] each.
struct AttnCache {
  std::vector<float> keys;
  std::vector<float> values;
  std::size_t length = 0;
  std::size_t width = 0;

  std::size_t bytes() const { return 2 * length * width * sizeof(float); }
};

using LayerState = std::variant<ConvState, AttnCache>;

struct SessionState {
  std::vector<LayerState> layers;
  std::size_t position = 0;

  // Floats held by the caches, in bytes: (k-1)*d per conv layer plus
  // 2*G*s per position per attention layer.
  std::size_t state_bytes() const;
};

Tensor gated_conv_block(const Tensor& h, const ConvWeights& w,
                        ConvState* state = nullptr);

// Causal grouped-query attention with QK-norm then RoPE. With a cache the
// chunk starts at position cache->length and its keys/values are appended.
Tensor gqa_block(const Tensor& h, const AttnWeights& w, const AttnGeometry& geo,
                 AttnCache* cache = nullptr);

Tensor swiglu_ffn(const Tensor& x, const FfnWeights& w);

struct MoEResult {
  Tensor out;                      // [L, d]
  Tensor gates;                    // [L, E], zero for unselected experts
  std::vector<std::size_t> load;   // tokens routed to each expert
};

// Sigmoid router; experts chosen by score + bias, gates are the chosen raw
// scores renormalized to sum to one.
MoEResult moe_ffn(const Tensor& x, const MoEWeights& w);

// bias_e + gamma * sign(mean_load - load_e)
Tensor update_router_bias(std::span<const std::size_t> load, const Tensor& bias,
                          float gamma);

// Immutable parameter set plus config. Copies share the parameters.
class Model {
 public:
  // Throws CompatibilityError if params do not match the config exactly.
  Model(ModelConfig config, Checkpoint params);

  const ModelConfig& config() const { return config_; }
  const Checkpoint& params() const { return *params_; }
  const Tensor& param(std::string_view name) const;

  struct Layer {
    const Tensor* op_norm = nullptr;
    const Tensor* ffn_norm = nullptr;
    bool attention = false;
    ConvWeights conv;
    AttnWeights attn;
    bool moe = false;
    FfnWeights ffn;
    MoEWeights experts;
  };
  const std::vector<Layer>& layers() const { return layers_; }
  AttnGeometry attention_geometry() const;

  const Tensor& embedding() const { return *embed_; }
  const Tensor& final_norm() const { return *final_norm_; }
  // [d, vocab], or null when tied to the embedding.
  const Tensor* lm_head() const { return lm_head_; }

 private:
  ModelConfig config_;
  std::shared_ptr<const Checkpoint> params_;
  std::vector<Layer> layers_;
  const Tensor* embed_ = nullptr;
  const Tensor* final_norm_ = nullptr;
  const Tensor* lm_head_ = nullptr;
};

// Linear weights ~ N(0, 1/fan_in), embeddings ~ N(0, 1), norm gains 1,
// biases 0. Each tensor draws from its own named stream.
Model build_model(const ModelConfig& config, RngSeed seed);

SessionState new_session(const Model& model);

// Runs a chunk of tokens through the stack from the session's position,
// advancing it. Returns logits [L, vocab]; optionally the final normed
// hidden states [L, d].
Tensor forward(const Model& model, std::span<const TokenId> tokens,
               SessionState& state, Tensor* hidden = nullptr);

struct PrefillResult {
  Tensor logits;  // [L, vocab]
  SessionState state;
};

PrefillResult prefill(const Model& model, std::span<const TokenId> tokens);

// Logits [vocab] for one token; advances the state by one position.
Tensor decode_step(const Model& model, TokenId token, SessionState& state);

// Final normed hidden states [L, d] of a fresh session.
Tensor final_hidden(const Model& model, std::span<const TokenId> tokens);

std::size_t argmax(std::span<const float> row);

// Greedy decoding; empty output for n_tokens == 0.
std::vector<TokenId> generate_greedy(const Model& model,
                                     std::span<const TokenId> prompt,
                                     std::size_t n_tokens);

}  // namespace lfm
