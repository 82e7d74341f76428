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

#include "lfm/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "lfm/error.hpp"
#include "lfm/kernels.hpp"

namespace lfm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log-softmax of values[i] / tau over the given entries.
std::vector<double> tempered_log_softmax(std::span<const double> values, double tau) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v / tau);
  double sum = 0.0;
  for (double v : values) sum += std::exp(v / tau - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / tau - lse;
  return out;
}

// Student-side quantities shared by the forward and reverse objectives.
struct StudentSplit {
  std::vector<double> log_p;      // log softmax over the full vocabulary
  std::vector<std::uint8_t> in_topk;
  std::vector<double> topk_logits;
  bool has_tail = false;
  double log_mass = 0.0;          // log P_S(T)
  double log_tail_mass = kNegInf; // log P_S(not T)
  double lse_topk = 0.0;
  double lse_tail = kNegInf;
};

StudentSplit split_student(const Tensor& logits, const TopKRecord& record) {
  record.validate();
  if (logits.rank() != 1 || logits.size() != record.vocab_size) {
    throw DimensionError("student logits " + shape_string(logits.shape()) +
                         " do not match vocabulary of " +
                         std::to_string(record.vocab_size));
  }
  const std::size_t vocab = logits.size();
  StudentSplit s;
  s.in_topk.assign(vocab, 0);
  for (auto idx : record.indices) s.in_topk[idx] = 1;
  s.has_tail = record.k() < vocab;

  const double lse_all = logsumexp(logits.data());
  s.log_p.resize(vocab);
  for (std::size_t i = 0; i < vocab; ++i) s.log_p[i] = double(logits[i]) - lse_all;

  s.topk_logits.reserve(record.k());
  for (auto idx : record.indices) s.topk_logits.push_back(logits[idx]);
  double mx_t = kNegInf, mx_r = kNegInf;
  for (std::size_t i = 0; i < vocab; ++i) {
    double& mx = s.in_topk[i] ? mx_t : mx_r;
    mx = std::max(mx, double(logits[i]));
  }
  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    if (s.in_topk[i]) {
      sum_t += std::exp(double(logits[i]) - mx_t);
    } else {
      sum_r += std::exp(double(logits[i]) - mx_r);
    }
  }
  s.lse_topk = mx_t + std::log(sum_t);
  s.log_mass = s.lse_topk - lse_all;
  if (s.has_tail) {
    s.lse_tail = mx_r + std::log(sum_r);
    s.log_tail_mass = s.lse_tail - lse_all;
  } else {
    s.log_mass = 0.0;
  }
  return s;
}

struct TeacherSplit {
  std::vector<double> logits;
  double log_mass = 0.0;
  double log_tail_mass = kNegInf;
};

TeacherSplit split_teacher(const TopKRecord& r) {
  TeacherSplit t;
  t.logits.assign(r.teacher_logits.begin(), r.teacher_logits.end());
  if (r.k() < r.vocab_size) {
    double mx = kNegInf;
    for (double v : t.logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : t.logits) sum += std::exp(v - mx);
    const double lse_topk = mx + std::log(sum);
    const double total = log_add_exp(lse_topk, double(r.tail_logsumexp));
    t.log_mass = lse_topk - total;
    t.log_tail_mass = double(r.tail_logsumexp) - total;
  }
  return t;
}

const double kLogFloor = std::log(kProbabilityFloor);

// max(log x, log floor), reporting whether the floor was hit.
double floored(double log_x, bool& clamped) {
  if (log_x < kLogFloor) {
    clamped = true;
    return kLogFloor;
  }
  return log_x;
}

}  // namespace

void TopKRecord::validate() const {
  if (indices.empty()) throw InputError("Top-K record: K must be at least 1");
  if (indices.size() > vocab_size) {
    throw InputError("Top-K record: K = " + std::to_string(indices.size()) +
                     " exceeds vocabulary size " + std::to_string(vocab_size));
  }
  if (teacher_logits.size() != indices.size()) {
    throw InputError("Top-K record: index and logit counts differ");
  }
  std::unordered_set<std::uint32_t> seen;
  for (auto idx : indices) {
    if (idx >= vocab_size) {
      throw InputError("Top-K record: index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) {
      throw InputError("Top-K record: duplicate index " + std::to_string(idx));
    }
  }
  if (std::isnan(tail_logsumexp)) throw InputError("Top-K record: tail log-sum-exp is NaN");
}

double TopKRecord::teacher_mass() const { return std::exp(split_teacher(*this).log_mass); }

TopKRecord make_topk_record(std::span<const float> teacher_logits, std::size_t k) {
  const std::size_t vocab = teacher_logits.size();
  if (k == 0 || k > vocab) {
    throw InputError("make_topk_record: K must lie in [1, " + std::to_string(vocab) + "]");
  }
  std::vector<std::uint32_t> order(vocab);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + long(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return teacher_logits[a] != teacher_logits[b]
                                 ? teacher_logits[a] > teacher_logits[b]
                                 : a < b;
                    });
  TopKRecord r;
  r.vocab_size = std::uint32_t(vocab);
  r.indices.assign(order.begin(), order.begin() + long(k));
  for (auto idx : r.indices) r.teacher_logits.push_back(teacher_logits[idx]);
  if (k < vocab) {
    std::vector<float> tail;
    tail.reserve(vocab - k);
    for (std::size_t i = k; i < vocab; ++i) tail.push_back(teacher_logits[order[i]]);
    r.tail_logsumexp = float(logsumexp(tail));
  } else {
    r.tail_logsumexp = -std::numeric_limits<float>::infinity();
  }
  return r;
}

namespace {

// Gradient kept in double until the end; the membership and conditional
// parts cancel to well below float resolution on some coordinates.
DtkBreakdown dtk_core(const Tensor& student_logits, const TopKRecord& record, double tau,
                      std::vector<double>& grad) {
  if (!(tau >= 1.0)) throw DomainError("dtk_loss: temperature must be >= 1");
  const StudentSplit s = split_student(student_logits, record);
  const TeacherSplit t = split_teacher(record);
  const std::size_t vocab = student_logits.size();
  const std::size_t k = record.k();

  DtkBreakdown b;
  const double a = std::exp(t.log_mass);
  b.topk_mass_teacher = a;
  b.topk_mass_student = std::exp(s.log_mass);

  // Membership term, untempered.
  bool clamp_in = false, clamp_out = false;
  const double log_b = floored(s.log_mass, clamp_in);
  double binary = a * (t.log_mass - log_b);
  double log_nb = 0.0;
  if (s.has_tail) {
    log_nb = floored(s.log_tail_mass, clamp_out);
    const double na = std::exp(t.log_tail_mass);
    if (na > 0.0) binary += na * (t.log_tail_mass - log_nb);
  }
  b.clamped = clamp_in || clamp_out;
  b.binary_term = std::max(binary, 0.0);

  // Tempered conditional term on T.
  const auto log_pt = tempered_log_softmax(t.logits, tau);
  const auto log_qt = tempered_log_softmax(s.topk_logits, tau);
  double kl = 0.0;
  for (std::size_t i = 0; i < k; ++i) kl += std::exp(log_pt[i]) * (log_pt[i] - log_qt[i]);
  kl = std::max(kl, 0.0);
  b.conditional_kl = tau * tau * kl;
  b.conditional_term = a * b.conditional_kl;
  b.total = b.binary_term + b.conditional_term;

  // d L_B / dz_y = -a (q_y [y in T] - p_y) - (1 - a)(r_y [y not in T] - p_y),
  // with q and r the student conditionals on T and on its complement.
  grad.assign(vocab, 0.0);
  const double na = s.has_tail ? std::exp(t.log_tail_mass) : 0.0;
  const double w_in = clamp_in ? 0.0 : a;
  const double w_out = clamp_out ? 0.0 : na;
  for (std::size_t y = 0; y < vocab; ++y) {
    const double p = std::exp(s.log_p[y]);
    double g = (w_in + w_out) * p;
    if (s.in_topk[y]) {
      g -= w_in * std::exp(double(student_logits[y]) - s.lse_topk);
    } else {
      g -= w_out * std::exp(double(student_logits[y]) - s.lse_tail);
    }
    grad[y] = g;
  }
  for (std::size_t i = 0; i < k; ++i) {
    grad[record.indices[i]] += a * tau * (std::exp(log_qt[i]) - std::exp(log_pt[i]));
  }
  return b;
}

Tensor to_float(const Shape& shape, const std::vector<double>& g) {
  Tensor out(shape);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = float(g[i]);
  return out;
}

}  // namespace

DtkResult dtk_loss(const Tensor& student_logits, const TopKRecord& record, double tau) {
  std::vector<double> grad;
  DtkResult res;
  res.breakdown = dtk_core(student_logits, record, tau, grad);
  res.grad = to_float(student_logits.shape(), grad);
  return res;
}

double full_forward_kl(std::span<const double> teacher_probs, const Tensor& student_logits) {
  if (student_logits.rank() != 1 || teacher_probs.size() != student_logits.size()) {
    throw DimensionError("full_forward_kl: teacher and student lengths differ");
  }
  const double lse = logsumexp(student_logits.data());
  double kl = 0.0;
  for (std::size_t i = 0; i < teacher_probs.size(); ++i) {
    const double p = teacher_probs[i];
    if (p < 0.0 || std::isnan(p)) throw InputError("full_forward_kl: invalid teacher probability");
    if (p == 0.0) continue;
    const double log_q = double(student_logits[i]) - lse;
    if (log_q == kNegInf) return std::numeric_limits<double>::infinity();
    kl += p * (std::log(p) - log_q);
  }
  return kl;
}

NaiveTemperedKl naive_truncated_tempered_kl(const TopKRecord& record,
                                            const Tensor& student_logits, double tau) {
  if (!(tau > 0.0)) throw DomainError("naive_truncated_tempered_kl: temperature must be positive");
  const StudentSplit s = split_student(student_logits, record);
  (void)s;
  std::vector<double> teacher(record.teacher_logits.begin(), record.teacher_logits.end());
  const auto log_pt = tempered_log_softmax(teacher, tau);
  std::vector<double> student(student_logits.data().begin(), student_logits.data().end());
  const auto log_ps = tempered_log_softmax(student, tau);
  NaiveTemperedKl out;
  for (std::size_t i = 0; i < record.k(); ++i) {
    out.inner_kl += std::exp(log_pt[i]) * (log_pt[i] - log_ps[record.indices[i]]);
  }
  out.value = tau * tau * out.inner_kl;
  return out;
}

DtkResult reverse_dtk_loss(const Tensor& student_logits, const TopKRecord& record,
                           double tau, ReverseVariant variant) {
  if (!(tau >= 1.0)) throw DomainError("reverse_dtk_loss: temperature must be >= 1");
  const StudentSplit s = split_student(student_logits, record);
  const TeacherSplit t = split_teacher(record);
  const std::size_t vocab = student_logits.size();
  const std::size_t k = record.k();

  DtkResult res;
  auto& bd = res.breakdown;
  const double a = std::exp(t.log_mass);
  const double b = std::exp(s.log_mass);
  bd.topk_mass_teacher = a;
  bd.topk_mass_student = b;

  // KL(Bern(b) || Bern(a)); teacher masses floored as well since the
  // teacher sits in the second argument.
  bool clamped = false;
  double binary = 0.0, d_binary_db = 0.0;
  if (s.has_tail) {
    bool cb = false, cnb = false;
    const double log_b = floored(s.log_mass, cb);
    const double log_nb = floored(s.log_tail_mass, cnb);
    const double log_a = floored(t.log_mass, clamped);
    const double log_na = floored(t.log_tail_mass, clamped);
    const double nb = std::exp(s.log_tail_mass);
    binary = b * (log_b - log_a) + nb * (log_nb - log_na);
    d_binary_db = (log_b - log_a) + (cb ? 0.0 : 1.0) - (log_nb - log_na) - (cnb ? 0.0 : 1.0);
    clamped = clamped || cb || cnb;
  }
  bd.binary_term = std::max(binary, 0.0);
  bd.clamped = clamped;

  const auto log_pt = tempered_log_softmax(t.logits, tau);
  const auto log_qt = tempered_log_softmax(s.topk_logits, tau);
  double kl = 0.0;
  for (std::size_t i = 0; i < k; ++i) kl += std::exp(log_qt[i]) * (log_qt[i] - log_pt[i]);
  kl = std::max(kl, 0.0);
  bd.conditional_kl = tau * tau * kl;
  const double weight = variant == ReverseVariant::lower_bound ? b : a;
  bd.conditional_term = weight * bd.conditional_kl;
  bd.total = bd.binary_term + bd.conditional_term;

  // Chain through b = P_S(T): db/dz_y = p_y ([y in T] - b).
  double d_db = d_binary_db;
  if (variant == ReverseVariant::lower_bound) d_db += bd.conditional_kl;
  std::vector<double> grad(vocab, 0.0);
  if (s.has_tail) {
    for (std::size_t y = 0; y < vocab; ++y) {
      const double p = std::exp(s.log_p[y]);
      grad[y] = d_db * p * ((s.in_topk[y] ? 1.0 : 0.0) - b);
    }
  }
  // d(tau^2 KL(q || p)) / dz_i = tau q_i (log q_i - log p_i - KL)
  for (std::size_t i = 0; i < k; ++i) {
    const double q = std::exp(log_qt[i]);
    const double g = weight * tau * q * (log_qt[i] - log_pt[i] - kl);
    grad[record.indices[i]] += g;
  }
  res.grad = to_float(student_logits.shape(), grad);
  return res;
}

KdResult kd_training_loss(const Tensor& student_logits, std::span<const TopKRecord> records,
                          std::span<const TokenId> hard_labels, double tau, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InputError("kd_training_loss: alpha must lie in [0, 1]");
  }
  if (student_logits.rank() != 2) throw DimensionError("kd_training_loss: logits must be [L, vocab]");
  const std::size_t len = student_logits.dim(0), vocab = student_logits.dim(1);
  if (records.size() != len || hard_labels.size() != len) {
    throw InputError("kd_training_loss: need one record and one label per position");
  }
  if (len == 0) throw InputError("kd_training_loss: empty batch");
  KdResult res;
  res.grad = Tensor(student_logits.shape());
  const double inv_len = 1.0 / double(len);
  for (std::size_t t = 0; t < len; ++t) {
    if (hard_labels[t] >= vocab) {
      throw InputError("kd_training_loss: label " + std::to_string(hard_labels[t]) +
                       " at position " + std::to_string(t) + " out of range");
    }
    const auto row = student_logits.row(t);
    const Tensor logits({vocab}, std::vector<float>(row.begin(), row.end()));
    auto grad_row = res.grad.row(t);
    std::vector<double> g_row(vocab, 0.0);
    double loss_t = 0.0;
    if (alpha > 0.0) {
      std::vector<double> g_dtk;
      const DtkBreakdown d = dtk_core(logits, records[t], tau, g_dtk);
      loss_t += alpha * d.total;
      if (d.clamped) ++res.clamped_positions;
      for (std::size_t v = 0; v < vocab; ++v) g_row[v] += alpha * inv_len * g_dtk[v];
    }
    if (alpha < 1.0) {
      const double lse = logsumexp(row);
      loss_t += (1.0 - alpha) * (lse - double(row[hard_labels[t]]));
      for (std::size_t v = 0; v < vocab; ++v) {
        double g = std::exp(double(row[v]) - lse);
        if (v == hard_labels[t]) g -= 1.0;
        g_row[v] += (1.0 - alpha) * inv_len * g;
      }
    }
    for (std::size_t v = 0; v < vocab; ++v) grad_row[v] = float(g_row[v]);
    res.loss += loss_t * inv_len;
  }
  return res;
}

}  // namespace lfm
