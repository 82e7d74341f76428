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

#include <doctest.h>

#include "lfm/config.hpp"
#include "lfm/error.hpp"

using namespace lfm;

TEST_CASE("json round trip keeps every field") {
  auto c = preset_config("toy-moe");
  c.tie_embeddings = true;
  c.rope_base = 5000.0f;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.moe.has_value());
  CHECK(back.moe->top_k == 2);
}

TEST_CASE("attention positions default to evenly spaced layers") {
  CHECK(evenly_spaced_layers(16, 6) == std::vector<std::size_t>{2, 4, 6, 9, 11, 13});
  CHECK(evenly_spaced_layers(4, 1) == std::vector<std::size_t>{2});
  CHECK(evenly_spaced_layers(3, 3) == std::vector<std::size_t>{0, 1, 2});
  nlohmann::json j = config_to_json(preset_config("toy"));
  j.erase("attn_layer_indices");
  j["n_attn_layers"] = 2;
  CHECK(config_from_json(j).attn_layer_indices == evenly_spaced_layers(4, 2));
}

TEST_CASE("inconsistent geometry is a configuration error") {
  auto c = preset_config("toy");
  c.n_heads = 5;
  c.n_kv_groups = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("toy");
  c.attn_layer_indices = {4};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("toy-moe");
  c.moe->top_k = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = preset_config("toy");
  c.head_size = 15;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_layers", "x"}}), ConfigError);
}

TEST_CASE("released geometries") {
  const auto c = preset_config("lfm2-350m");
  CHECK(c.n_layers == 16);
  CHECK(c.d_model == 1024);
  CHECK(c.ff_dim == 4608);
  CHECK(c.n_heads == 16);
  CHECK(c.n_kv_groups == 8);
  CHECK(c.head_size == 64);
  CHECK(c.attn_layer_indices.size() == 6);
  CHECK(c.conv_kernel == 3);
  const auto moe = preset_config("lfm2-8b-a1b");
  CHECK(moe.moe->n_experts == 32);
  CHECK(moe.moe->top_k == 4);
  CHECK(moe.moe->expert_ff_dim == 1792);
  CHECK(moe.moe->n_dense_prefix_layers == 2);
  CHECK_FALSE(moe.is_moe_layer(1));
  CHECK(moe.is_moe_layer(2));
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset_config(name).validate());
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}
