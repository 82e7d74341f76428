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
#include <iosfwd>
#include <span>
#include <vector>

#include "lfm/backbone.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

// Teacher information for one position: the Top-K token ids, their logits,
// and the log-sum-exp of the logits outside the Top-K set. The tail term
// makes the teacher's Top-K mass exact; it is -inf when K == vocab_size.
struct TopKRecord {
  std::vector<std::uint32_t> indices;
  std::vector<float> teacher_logits;
  float tail_logsumexp = 0.0f;
  std::uint32_t vocab_size = 0;

  std::size_t k() const { return indices.size(); }
  // Throws InputError unless indices are distinct, in range, and K >= 1.
  void validate() const;
  // Teacher probability mass on the Top-K set.
  double teacher_mass() const;
};

// Builds a record from a full teacher logit row, keeping the k largest
// (ties broken by lower index).
TopKRecord make_topk_record(std::span<const float> teacher_logits, std::size_t k);

// Terms of the decoupled objective for one position. For the forward
// direction binary_term = KL(Bern(P_T(T)) || Bern(P_S(T))) and
// conditional_term = P_T(T) * conditional_kl, where conditional_kl is the
// tau^2-scaled KL between the tempered conditionals on T.
struct DtkBreakdown {
  double binary_term = 0.0;
  double conditional_term = 0.0;
  double conditional_kl = 0.0;
  double topk_mass_teacher = 0.0;
  double topk_mass_student = 0.0;
  double total = 0.0;
  // A Top-K mass was floored at 1e-12 (or capped at 1 - 1e-12).
  bool clamped = false;
};

struct DtkResult {
  DtkBreakdown breakdown;
  Tensor grad;  // d total / d student_logits, same shape as the logits
};

inline constexpr double kProbabilityFloor = 1e-12;

DtkResult dtk_loss(const Tensor& student_logits, const TopKRecord& record,
                   double tau);

// Full-vocabulary KL(P_T || P_S) with P_S = softmax(student_logits). Returns
// +inf when the student assigns zero probability where the teacher does not.
double full_forward_kl(std::span<const double> teacher_probs,
                       const Tensor& student_logits);

struct NaiveTemperedKl {
  double inner_kl = 0.0;  // KL(trunc(P_T)^(tau) || P_S^(tau))
  double value = 0.0;     // tau^2 * inner_kl
};

// Baseline that truncates the teacher to T and tempers over the whole
// vocabulary; diverges like tau^2 * log(|A| / |T|).
NaiveTemperedKl naive_truncated_tempered_kl(const TopKRecord& record,
                                            const Tensor& student_logits,
                                            double tau);

enum class ReverseVariant { lower_bound, teacher_weighted };

// KL(Bern(P_S(T)) || Bern(P_T(T))) + w * tau^2 KL(q^(tau) || p^(tau)) with
// w = P_S(T) (lower_bound) or P_T(T) (teacher_weighted).
DtkResult reverse_dtk_loss(const Tensor& student_logits, const TopKRecord& record,
                           double tau, ReverseVariant variant);

struct KdResult {
  double loss = 0.0;
  Tensor grad;  // [L, vocab]
  std::size_t clamped_positions = 0;
};

// mean_t [alpha * L_DTK(t) + (1 - alpha) * CE(label_t)]
KdResult kd_training_loss(const Tensor& student_logits,
                          std::span<const TopKRecord> records,
                          std::span<const TokenId> hard_labels, double tau,
                          double alpha);

// "TKD1" teacher file, little-endian: magic, u32 vocab_size, u16 K,
// u64 n_positions, then per position K x u32 ids, K x f32 logits,
// f32 tail log-sum-exp.
struct TopKFile {
  std::uint32_t vocab_size = 0;
  std::uint16_t k = 0;
  std::vector<TopKRecord> records;
};

void write_topk_file(std::ostream& os, const TopKFile& file);
TopKFile read_topk_file(std::istream& is);

}  // namespace lfm
