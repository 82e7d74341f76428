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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lfm {

struct MoEConfig {
  std::size_t n_experts = 32;
  std::size_t top_k = 4;
  std::size_t expert_ff_dim = 0;
  // Leading layers that keep a dense SwiGLU MLP.
  std::size_t n_dense_prefix_layers = 2;
  float router_bias_step = 1e-3f;
};

// Backbone hyperparameters. Layers not listed in attn_layer_indices are gated
// short-convolution layers.
struct ModelConfig {
  std::string name = "lfm";
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t ff_dim = 0;
  std::size_t n_heads = 0;
  std::size_t n_kv_groups = 0;
  std::size_t head_size = 0;
  std::vector<std::size_t> attn_layer_indices;
  std::size_t conv_kernel = 3;
  std::size_t vocab_size = 0;
  float rope_base = 10000.0f;
  std::optional<MoEConfig> moe;
  std::size_t context_limit = 4096;
  bool tie_embeddings = false;
  float norm_eps = 1e-5f;

  // Throws ConfigError on inconsistent geometry.
  void validate() const;

  bool is_attention_layer(std::size_t layer) const;
  bool is_moe_layer(std::size_t layer) const;
  std::size_t attention_width() const { return n_heads * head_size; }
  std::size_t kv_width() const { return n_kv_groups * head_size; }
};

// `count` attention positions spread evenly over `n_layers`.
std::vector<std::size_t> evenly_spaced_layers(std::size_t n_layers,
                                              std::size_t count);

// JSON uses the struct's field names. When attn_layer_indices is absent an
// integer n_attn_layers selects evenly spaced positions.
ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig load_config(const std::filesystem::path& path);

// Built-in geometries: the released LFM2 family plus small test and
// benchmark models.
ModelConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace lfm
