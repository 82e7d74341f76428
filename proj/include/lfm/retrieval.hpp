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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lfm/backbone.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

enum class Role { query, document };

struct RetrievalLimits {
  std::size_t max_query_tokens = 32;
  std::size_t max_document_tokens = 512;

  std::size_t cap(Role role) const {
    return role == Role::query ? max_query_tokens : max_document_tokens;
  }
};

// Rows are unit-norm.
struct TokenEmbeddings {
  Tensor vectors;  // [n_tokens, proj_dim]
  Role role = Role::query;
  bool truncated = false;

  std::size_t n_tokens() const { return vectors.dim(0); }
};

// Normalizes each row; a zero row raises NumericError.
TokenEmbeddings make_embeddings(Tensor vectors, Role role);

// Final hidden states through a bias-free projection [d_model, proj_dim].
// Inputs beyond the role cap are truncated and flagged.
TokenEmbeddings encode(const Model& model, const Tensor& projection,
                       std::span<const TokenId> tokens, Role role,
                       const RetrievalLimits& limits = {});

// Cosines [n_query, n_doc], clamped to [-1, 1].
Tensor similarity_matrix(const TokenEmbeddings& q, const TokenEmbeddings& d);

double maxsim_score(const TokenEmbeddings& q, const TokenEmbeddings& d);

// Sum of row maxima of a precomputed similarity matrix.
double maxsim_from_similarity(const std::vector<std::vector<double>>& sim);

std::vector<double> minmax_normalize(std::span<const double> scores);

struct ScoredCandidates {
  std::vector<double> teacher_scores;  // raw; normalized inside the loss
  std::vector<double> student_scores;
};

struct MseResult {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. student scores
};

MseResult distill_mse_loss(const ScoredCandidates& cands);

// Toy encoder: fixed hidden states, trainable projection.
struct ProjectionProblem {
  Tensor query_hidden;               // [n_q, d]
  std::vector<Tensor> doc_hidden;    // each [n_d, d]
  std::vector<double> teacher_scores;
};

struct ProjectionLoss {
  double loss = 0.0;
  std::vector<double> student_scores;
  Tensor grad;  // [d, proj_dim]
};

ProjectionLoss projection_loss(const ProjectionProblem& problem, const Tensor& projection);

// One gradient-descent step; returns the updated projection.
Tensor projection_sgd_step(const ProjectionProblem& problem, const Tensor& projection,
                           double learning_rate);

struct SearchHit {
  std::string id;
  double score = 0.0;
};

// Immutable once built; safe to share across query threads.
class DocumentIndex {
 public:
  void add(std::string id, TokenEmbeddings doc);
  std::size_t size() const { return docs_.size(); }
  const std::map<std::string, TokenEmbeddings>& documents() const { return docs_; }

  // Descending score, ties by id.
  std::vector<SearchHit> search(const TokenEmbeddings& query, std::size_t top_n) const;

  // One tensor per document, named doc/<id>.
  void save(const std::filesystem::path& path) const;
  static DocumentIndex load(const std::filesystem::path& path);

 private:
  std::map<std::string, TokenEmbeddings> docs_;
};

}  // namespace lfm
