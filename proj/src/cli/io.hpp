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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lfm/backbone.hpp"
#include "lfm/config.hpp"
#include "lfm/distill.hpp"
#include "lfm/retrieval.hpp"

namespace lfm::cli {

std::string read_file(const std::filesystem::path& path);

// "1,2,3" or "1 2 3".
std::vector<TokenId> parse_token_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

// A readable file path, otherwise a preset name.
ModelConfig resolve_config(const std::string& config_arg);

// Loads the checkpoint when given, otherwise builds seeded weights.
Model load_model(const ModelConfig& config, const std::optional<std::string>& checkpoint,
                 RngSeed seed);

// A single-tensor LFT1 file, or seeded N(0, 1/d) weights of [d_model, proj_dim].
Tensor load_projection(const Model& model, const std::optional<std::string>& path,
                       std::size_t proj_dim, RngSeed seed);

struct DtkFixture {
  Tensor student_logits;
  TopKRecord record;
};

// JSONL. Each line holds "student_logits" plus either full "teacher_logits"
// (reduced to the top k) or "indices", "topk_logits", "tail_logsumexp".
std::vector<DtkFixture> read_dtk_jsonl(std::istream& is, std::size_t k);

// JSONL with "teacher" and "student" score arrays per line.
std::vector<ScoredCandidates> read_scored_jsonl(std::istream& is);

}  // namespace lfm::cli
