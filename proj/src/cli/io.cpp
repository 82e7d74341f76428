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

#include "cli/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfm/checkpoint.hpp"
#include "lfm/error.hpp"
#include "lfm/rng.hpp"

namespace lfm::cli {
namespace {

template <typename Fn>
void for_each_json_line(std::istream& is, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::vector<std::uint64_t> parse_unsigned_list(const std::string& text) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<std::uint64_t> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.front() == '-') {
      throw InputError("expected a non-negative integer, got '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<TokenId> parse_token_list(const std::string& text) {
  std::vector<TokenId> out;
  for (auto v : parse_unsigned_list(text)) {
    if (v > std::numeric_limits<TokenId>::max()) throw InputError("token id out of range");
    out.push_back(TokenId(v));
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto v : parse_unsigned_list(text)) out.push_back(std::size_t(v));
  return out;
}

ModelConfig resolve_config(const std::string& config_arg) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(config_arg, ec)) return load_config(config_arg);
  return preset_config(config_arg);
}

Model load_model(const ModelConfig& config, const std::optional<std::string>& checkpoint,
                 RngSeed seed) {
  if (checkpoint) return Model(config, load_checkpoint(*checkpoint));
  return build_model(config, seed);
}

Tensor load_projection(const Model& model, const std::optional<std::string>& path,
                       std::size_t proj_dim, RngSeed seed) {
  const std::size_t d = model.config().d_model;
  if (path) {
    const auto ckpt = load_checkpoint(*path);
    if (ckpt.size() != 1) throw FormatError("projection file must hold exactly one tensor");
    const Tensor& t = ckpt.begin()->second;
    if (t.rank() != 2 || t.dim(0) != d) {
      throw DimensionError("projection " + shape_string(t.shape()) + " must be [" +
                           std::to_string(d) + ", proj_dim]");
    }
    return t;
  }
  if (proj_dim == 0) throw InputError("projection width must be positive");
  auto gen = stream_for(seed, "retrieval.projection");
  Tensor p({d, proj_dim});
  const double sd = 1.0 / std::sqrt(double(d));
  for (auto& v : p.data()) v = float(sd * standard_normal(gen));
  return p;
}

std::vector<DtkFixture> read_dtk_jsonl(std::istream& is, std::size_t k) {
  std::vector<DtkFixture> out;
  for_each_json_line(is, [&](const nlohmann::json& j) {
    const auto student = j.at("student_logits").get<std::vector<float>>();
    if (student.empty()) throw InputError("student_logits is empty");
    DtkFixture f{Tensor({student.size()}, student), {}};
    if (j.contains("teacher_logits")) {
      const auto teacher = j.at("teacher_logits").get<std::vector<float>>();
      if (teacher.size() != student.size()) {
        throw InputError("teacher and student vocabularies differ");
      }
      f.record = make_topk_record(teacher, std::min(k, teacher.size()));
    } else {
      f.record.vocab_size = std::uint32_t(student.size());
      f.record.indices = j.at("indices").get<std::vector<std::uint32_t>>();
      f.record.teacher_logits = j.at("topk_logits").get<std::vector<float>>();
      const auto& tail = j.at("tail_logsumexp");
      f.record.tail_logsumexp =
          tail.is_null() ? -std::numeric_limits<float>::infinity() : tail.get<float>();
      f.record.validate();
    }
    out.push_back(std::move(f));
  });
  return out;
}

std::vector<ScoredCandidates> read_scored_jsonl(std::istream& is) {
  std::vector<ScoredCandidates> out;
  for_each_json_line(is, [&](const nlohmann::json& j) {
    ScoredCandidates c;
    c.teacher_scores = j.at("teacher").get<std::vector<double>>();
    c.student_scores = j.at("student").get<std::vector<double>>();
    if (c.teacher_scores.size() != c.student_scores.size()) {
      throw InputError("teacher and student score counts differ");
    }
    out.push_back(std::move(c));
  });
  return out;
}

}  // namespace lfm::cli
