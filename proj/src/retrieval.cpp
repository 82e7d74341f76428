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

#include "lfm/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lfm/checkpoint.hpp"
#include "lfm/error.hpp"
#include "lfm/kernels.hpp"

namespace lfm {
namespace {

void normalize_rows(Tensor& t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    double ss = 0.0;
    for (float v : row) ss += double(v) * double(v);
    if (!(ss > 0.0) || !std::isfinite(ss)) {
      throw NumericError("token embedding has zero or non-finite norm", r);
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (float& v : row) v = float(double(v) * inv);
  }
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

struct Projected {
  std::vector<std::vector<double>> unit;  // normalized rows
  std::vector<double> norm;
};

Projected project(const Tensor& hidden, const Tensor& projection) {
  const std::size_t d = projection.dim(0), k = projection.dim(1);
  if (hidden.rank() != 2 || hidden.dim(1) != d) {
    throw DimensionError("hidden states " + shape_string(hidden.shape()) +
                         " do not match projection " + shape_string(projection.shape()));
  }
  Projected p;
  for (std::size_t r = 0; r < hidden.dim(0); ++r) {
    std::vector<double> u(k, 0.0);
    const auto h = hidden.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < k; ++j) u[j] += double(h[i]) * double(projection.at(i, j));
    }
    double ss = 0.0;
    for (double v : u) ss += v * v;
    const double n = std::sqrt(ss);
    if (!(n > 0.0)) throw NumericError("projected token has zero norm", r);
    for (double& v : u) v /= n;
    p.unit.push_back(std::move(u));
    p.norm.push_back(n);
  }
  return p;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Adds h ⊗ (I - e e^T) g / |u| to grad.
void backprop_row(std::span<const float> h, const std::vector<double>& e, double norm,
                  const std::vector<double>& g, Tensor& grad) {
  const double ge = dot(g, e);
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < e.size(); ++j) {
      grad.at(i, j) += float(double(h[i]) * (g[j] - ge * e[j]) / norm);
    }
  }
}

}  // namespace

TokenEmbeddings make_embeddings(Tensor vectors, Role role) {
  if (vectors.rank() != 2) throw DimensionError("token embeddings must be [n_tokens, dim]");
  normalize_rows(vectors);
  return TokenEmbeddings{std::move(vectors), role, false};
}

TokenEmbeddings encode(const Model& model, const Tensor& projection,
                       std::span<const TokenId> tokens, Role role,
                       const RetrievalLimits& limits) {
  if (tokens.empty()) throw InputError("encode: empty token sequence");
  if (projection.rank() != 2 || projection.dim(0) != model.config().d_model) {
    throw DimensionError("projection " + shape_string(projection.shape()) +
                         " must be [d_model, proj_dim]");
  }
  const std::size_t cap = limits.cap(role);
  const bool truncated = tokens.size() > cap;
  if (truncated) tokens = tokens.first(cap);
  const Tensor hidden = final_hidden(model, tokens);
  auto emb = make_embeddings(matmul(hidden, projection), role);
  emb.truncated = truncated;
  return emb;
}

Tensor similarity_matrix(const TokenEmbeddings& q, const TokenEmbeddings& d) {
  if (q.role != Role::query || d.role != Role::document) {
    throw InputError("maxsim expects a query and a document");
  }
  if (q.vectors.size() == 0 || d.vectors.size() == 0) throw InputError("empty embeddings");
  if (q.vectors.cols() != d.vectors.cols()) {
    throw DimensionError("query and document embedding widths differ");
  }
  Tensor sim({q.n_tokens(), d.n_tokens()});
  for (std::size_t a = 0; a < q.n_tokens(); ++a) {
    for (std::size_t b = 0; b < d.n_tokens(); ++b) {
      sim.at(a, b) = float(std::clamp(dot(q.vectors.row(a), d.vectors.row(b)), -1.0, 1.0));
    }
  }
  return sim;
}

double maxsim_score(const TokenEmbeddings& q, const TokenEmbeddings& d) {
  if (q.role != Role::query || d.role != Role::document) {
    throw InputError("maxsim expects a query and a document");
  }
  if (q.vectors.cols() != d.vectors.cols()) {
    throw DimensionError("query and document embedding widths differ");
  }
  double score = 0.0;
  for (std::size_t a = 0; a < q.n_tokens(); ++a) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < d.n_tokens(); ++b) {
      best = std::max(best, std::clamp(dot(q.vectors.row(a), d.vectors.row(b)), -1.0, 1.0));
    }
    score += best;
  }
  return score;
}

double maxsim_from_similarity(const std::vector<std::vector<double>>& sim) {
  if (sim.empty()) throw InputError("maxsim: empty query");
  double score = 0.0;
  for (const auto& row : sim) {
    if (row.empty()) throw InputError("maxsim: empty document");
    score += *std::max_element(row.begin(), row.end());
  }
  return score;
}

std::vector<double> minmax_normalize(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("minmax_normalize: empty input");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double mn = *lo, range = *hi - *lo;
  if (!(range > 0.0)) throw DomainError("minmax_normalize: scores are constant");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - mn) / range;
  return out;
}

MseResult distill_mse_loss(const ScoredCandidates& cands) {
  const std::size_t m = cands.student_scores.size();
  if (cands.teacher_scores.size() != m) {
    throw InputError("distill_mse_loss: " + std::to_string(cands.teacher_scores.size()) +
                     " teacher scores for " + std::to_string(m) + " student scores");
  }
  const auto target = minmax_normalize(cands.teacher_scores);
  MseResult res;
  res.grad.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double diff = target[i] - cands.student_scores[i];
    res.loss += diff * diff / double(m);
    res.grad[i] = -2.0 * diff / double(m);
  }
  return res;
}

ProjectionLoss projection_loss(const ProjectionProblem& problem, const Tensor& projection) {
  if (projection.rank() != 2) throw DimensionError("projection must be [d, proj_dim]");
  const std::size_t m = problem.doc_hidden.size();
  if (problem.teacher_scores.size() != m) throw InputError("one teacher score per document");
  const Projected q = project(problem.query_hidden, projection);
  std::vector<Projected> docs;
  ProjectionLoss res;
  for (const auto& dh : problem.doc_hidden) {
    docs.push_back(project(dh, projection));
    double s = 0.0;
    for (const auto& qa : q.unit) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& db : docs.back().unit) best = std::max(best, dot(qa, db));
      s += best;
    }
    res.student_scores.push_back(s);
  }
  const auto mse = distill_mse_loss({problem.teacher_scores, res.student_scores});
  res.loss = mse.loss;
  res.grad = Tensor(projection.shape());
  const std::size_t k = projection.dim(1);
  std::vector<std::vector<double>> gq(q.unit.size(), std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = docs[i];
    std::vector<std::vector<double>> gd(d.unit.size(), std::vector<double>(k, 0.0));
    for (std::size_t a = 0; a < q.unit.size(); ++a) {
      std::size_t best = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < d.unit.size(); ++b) {
        const double v = dot(q.unit[a], d.unit[b]);
        if (v > best_v) best_v = v, best = b;
      }
      for (std::size_t j = 0; j < k; ++j) {
        gq[a][j] += mse.grad[i] * d.unit[best][j];
        gd[best][j] += mse.grad[i] * q.unit[a][j];
      }
    }
    for (std::size_t b = 0; b < d.unit.size(); ++b) {
      backprop_row(problem.doc_hidden[i].row(b), d.unit[b], d.norm[b], gd[b], res.grad);
    }
  }
  for (std::size_t a = 0; a < q.unit.size(); ++a) {
    backprop_row(problem.query_hidden.row(a), q.unit[a], q.norm[a], gq[a], res.grad);
  }
  return res;
}

Tensor projection_sgd_step(const ProjectionProblem& problem, const Tensor& projection,
                           double learning_rate) {
  const auto l = projection_loss(problem, projection);
  Tensor next = projection;
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = float(double(next[i]) - learning_rate * double(l.grad[i]));
  }
  return next;
}

void DocumentIndex::add(std::string id, TokenEmbeddings doc) {
  if (doc.role != Role::document) throw InputError("index entries must be documents");
  if (!docs_.empty() && docs_.begin()->second.vectors.cols() != doc.vectors.cols()) {
    throw DimensionError("document embedding width differs from the index");
  }
  if (!docs_.emplace(std::move(id), std::move(doc)).second) {
    throw InputError("duplicate document id");
  }
}

std::vector<SearchHit> DocumentIndex::search(const TokenEmbeddings& query,
                                             std::size_t top_n) const {
  std::vector<SearchHit> hits;
  for (const auto& [id, doc] : docs_) hits.push_back({id, maxsim_score(query, doc)});
  std::stable_sort(hits.begin(), hits.end(),
                   [](const SearchHit& a, const SearchHit& b) { return a.score > b.score; });
  if (hits.size() > top_n) hits.resize(top_n);
  return hits;
}

void DocumentIndex::save(const std::filesystem::path& path) const {
  Checkpoint store;
  for (const auto& [id, doc] : docs_) store.emplace("doc/" + id, doc.vectors);
  save_checkpoint(path, store);
}

DocumentIndex DocumentIndex::load(const std::filesystem::path& path) {
  DocumentIndex index;
  for (auto& [name, t] : load_checkpoint(path)) {
    if (name.rfind("doc/", 0) != 0 || t.rank() != 2) {
      throw FormatError("document store entry '" + name + "' is not doc/<id> [n, dim]");
    }
    index.add(name.substr(4), TokenEmbeddings{t, Role::document, false});
  }
  return index;
}

}  // namespace lfm
