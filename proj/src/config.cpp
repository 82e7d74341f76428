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

#include "lfm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lfm/error.hpp"

namespace lfm {

void ModelConfig::validate() const {
  auto fail = [&](const std::string& why) {
    throw ConfigError("model config '" + name + "': " + why);
  };
  if (n_layers == 0) fail("n_layers must be positive");
  if (d_model == 0) fail("d_model must be positive");
  if (ff_dim == 0) fail("ff_dim must be positive");
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (conv_kernel == 0) fail("conv_kernel must be at least 1");
  if (context_limit == 0) fail("context_limit must be positive");
  if (!(norm_eps > 0.0f)) fail("norm_eps must be positive");
  if (!attn_layer_indices.empty()) {
    if (n_heads == 0 || n_kv_groups == 0 || head_size == 0) {
      fail("attention layers need n_heads, n_kv_groups and head_size");
    }
    if (n_heads % n_kv_groups != 0) {
      fail("n_heads (" + std::to_string(n_heads) +
           ") is not divisible by n_kv_groups (" + std::to_string(n_kv_groups) + ")");
    }
    if (head_size % 2 != 0) fail("head_size must be even for rotary embeddings");
    if (!(rope_base > 0.0f)) fail("rope_base must be positive");
  }
  std::set<std::size_t> seen;
  for (std::size_t i : attn_layer_indices) {
    if (i >= n_layers) fail("attention layer index " + std::to_string(i) + " out of range");
    if (!seen.insert(i).second) fail("duplicate attention layer index " + std::to_string(i));
  }
  if (moe) {
    if (moe->n_experts == 0) fail("moe.n_experts must be positive");
    if (moe->top_k == 0 || moe->top_k > moe->n_experts) {
      fail("moe.top_k must lie in [1, n_experts]");
    }
    if (moe->expert_ff_dim == 0) fail("moe.expert_ff_dim must be positive");
    if (moe->n_dense_prefix_layers > n_layers) fail("moe.n_dense_prefix_layers exceeds n_layers");
    if (!(moe->router_bias_step > 0.0f)) fail("moe.router_bias_step must be positive");
  }
}

bool ModelConfig::is_attention_layer(std::size_t layer) const {
  return std::find(attn_layer_indices.begin(), attn_layer_indices.end(), layer) !=
         attn_layer_indices.end();
}

bool ModelConfig::is_moe_layer(std::size_t layer) const {
  return moe && layer >= moe->n_dense_prefix_layers;
}

std::vector<std::size_t> evenly_spaced_layers(std::size_t n_layers,
                                              std::size_t count) {
  if (count > n_layers) {
    throw ConfigError("cannot place " + std::to_string(count) +
                      " attention layers in " + std::to_string(n_layers));
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back((i + 1) * n_layers / (count + 1));
  }
  // Dense packings can collide after flooring; shift forward.
  for (std::size_t i = 1; i < out.size(); ++i) {
    out[i] = std::max(out[i], out[i - 1] + 1);
  }
  for (std::size_t i = out.size(); i-- > 0;) {
    if (out[i] >= n_layers - (out.size() - 1 - i)) {
      out[i] = n_layers - (out.size() - i);
    }
  }
  return out;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.name = j.value("name", c.name);
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.ff_dim = j.at("ff_dim").get<std::size_t>();
    c.n_heads = j.value("n_heads", std::size_t{0});
    c.n_kv_groups = j.value("n_kv_groups", std::size_t{0});
    c.head_size = j.value("head_size", std::size_t{0});
    if (j.contains("attn_layer_indices")) {
      c.attn_layer_indices = j.at("attn_layer_indices").get<std::vector<std::size_t>>();
    } else if (j.contains("n_attn_layers")) {
      c.attn_layer_indices =
          evenly_spaced_layers(c.n_layers, j.at("n_attn_layers").get<std::size_t>());
    }
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.rope_base = j.value("rope_base", c.rope_base);
    c.context_limit = j.value("context_limit", c.context_limit);
    c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
    c.norm_eps = j.value("norm_eps", c.norm_eps);
    if (j.contains("moe") && !j.at("moe").is_null()) {
      const auto& m = j.at("moe");
      MoEConfig moe;
      moe.n_experts = m.at("n_experts").get<std::size_t>();
      moe.top_k = m.at("top_k").get<std::size_t>();
      moe.expert_ff_dim = m.at("expert_ff_dim").get<std::size_t>();
      moe.n_dense_prefix_layers = m.value("n_dense_prefix_layers", moe.n_dense_prefix_layers);
      moe.router_bias_step = m.value("router_bias_step", moe.router_bias_step);
      c.moe = moe;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j = {
      {"name", c.name},
      {"n_layers", c.n_layers},
      {"d_model", c.d_model},
      {"ff_dim", c.ff_dim},
      {"n_heads", c.n_heads},
      {"n_kv_groups", c.n_kv_groups},
      {"head_size", c.head_size},
      {"attn_layer_indices", c.attn_layer_indices},
      {"conv_kernel", c.conv_kernel},
      {"vocab_size", c.vocab_size},
      {"rope_base", c.rope_base},
      {"context_limit", c.context_limit},
      {"tie_embeddings", c.tie_embeddings},
      {"norm_eps", c.norm_eps},
  };
  if (c.moe) {
    j["moe"] = {{"n_experts", c.moe->n_experts},
                {"top_k", c.moe->top_k},
                {"expert_ff_dim", c.moe->expert_ff_dim},
                {"n_dense_prefix_layers", c.moe->n_dense_prefix_layers},
                {"router_bias_step", c.moe->router_bias_step}};
  } else {
    j["moe"] = nullptr;
  }
  return j;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

namespace {

ModelConfig dense_lfm2(std::string name, std::size_t layers, std::size_t d, std::size_t ff,
                       std::size_t heads, std::size_t n_attn) {
  ModelConfig c;
  c.name = std::move(name);
  c.n_layers = layers;
  c.d_model = d;
  c.ff_dim = ff;
  c.n_heads = heads;
  c.n_kv_groups = 8;
  c.head_size = 64;
  c.attn_layer_indices = evenly_spaced_layers(layers, n_attn);
  c.conv_kernel = 3;
  c.vocab_size = 65536;
  c.context_limit = 32768;
  return c;
}

ModelConfig small(std::string name, std::size_t layers, std::size_t d, std::size_t ff) {
  ModelConfig c;
  c.name = std::move(name);
  c.n_layers = layers;
  c.d_model = d;
  c.ff_dim = ff;
  c.vocab_size = 256;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"lfm2-350m", "lfm2-700m", "lfm2-1.2b", "lfm2-2.6b", "lfm2-8b-a1b",
          "toy",       "toy-moe",   "bench-conv", "bench-attn"};
}

ModelConfig preset_config(std::string_view name) {
  if (name == "lfm2-350m") return dense_lfm2("lfm2-350m", 16, 1024, 4608, 16, 6);
  if (name == "lfm2-700m") return dense_lfm2("lfm2-700m", 16, 1536, 6912, 24, 6);
  if (name == "lfm2-1.2b") return dense_lfm2("lfm2-1.2b", 16, 2048, 8192, 32, 6);
  if (name == "lfm2-2.6b") return dense_lfm2("lfm2-2.6b", 30, 2048, 10752, 32, 8);
  if (name == "lfm2-8b-a1b") {
    auto c = dense_lfm2("lfm2-8b-a1b", 24, 2048, 7168, 32, 6);
    c.moe = MoEConfig{32, 4, 1792, 2, 1e-3f};
    return c;
  }
  if (name == "toy") {
    auto c = small("toy", 4, 64, 192);
    c.n_heads = 4, c.n_kv_groups = 2, c.head_size = 16;
    c.attn_layer_indices = evenly_spaced_layers(4, 1);
    c.context_limit = 512;
    return c;
  }
  if (name == "toy-moe") {
    auto c = small("toy-moe", 4, 64, 192);
    c.n_heads = 4, c.n_kv_groups = 2, c.head_size = 16;
    c.attn_layer_indices = evenly_spaced_layers(4, 1);
    c.moe = MoEConfig{8, 2, 48, 2, 1e-3f};
    c.context_limit = 512;
    return c;
  }
  // Benchmark pair: same width and depth, conv-only versus attention-only
  // with H * head_size = d and one KV group per head.
  if (name == "bench-conv") {
    auto c = small("bench-conv", 4, 128, 384);
    c.context_limit = 4608;
    return c;
  }
  if (name == "bench-attn") {
    auto c = small("bench-attn", 4, 128, 384);
    c.n_heads = 8, c.n_kv_groups = 8, c.head_size = 16;
    c.attn_layer_indices = {0, 1, 2, 3};
    c.context_limit = 4608;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace lfm
