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

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lfm/archsearch.hpp"
#include "lfm/distill.hpp"
#include "lfm/tensor.hpp"

// Independent reference implementations. They favour directness over speed
// and share no code with the library beyond the data types.
namespace lfm::testing {

std::vector<double> softmax(std::span<const double> logits, double tau = 1.0);
std::vector<double> to_double(std::span<const float> x);

// Full teacher distribution implied by a Top-K record whose tail logits are
// known: the tail is shifted so its log-sum-exp equals the stored float.
std::vector<double> teacher_distribution(const TopKRecord& record,
                                         std::span<const float> full_logits);

double kl(std::span<const double> p, std::span<const double> q);

// KL between p and q restricted and renormalized to `members`, with
// temperature applied to the conditionals, scaled by tau^2.
double conditional_kl(std::span<const double> p, std::span<const double> q,
                      std::span<const std::uint32_t> members, double tau);

double bernoulli_kl(double a, double b);

struct DtkTerms {
  double binary = 0.0;
  double conditional = 0.0;  // tau^2 KL of the tempered conditionals
  double mass_teacher = 0.0;
  double mass_student = 0.0;
};

// Forward terms straight from probability vectors.
DtkTerms forward_terms(std::span<const double> teacher, std::span<const double> student,
                       std::span<const std::uint32_t> topk, double tau);
// Reverse terms: Bern(b) || Bern(a) and tau^2 KL(q^tau || p^tau).
DtkTerms reverse_terms(std::span<const double> teacher, std::span<const double> student,
                       std::span<const std::uint32_t> topk, double tau);

std::vector<std::uint32_t> complement(std::span<const std::uint32_t> members, std::size_t n);

// Central differences in double around a double point.
template <typename Fn>
std::vector<double> central_difference(Fn&& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_rel_error(std::span<const double> a, std::span<const double> b, double floor);

// Kernels written out from their defining equations.
Tensor rms_norm_ref(const Tensor& x, const Tensor& gain, double eps);
Tensor causal_conv_ref(const Tensor& y, const Tensor& w, const Tensor& bias);
Tensor swiglu_ref(const Tensor& x, const Tensor& wg, const Tensor& wu, const Tensor& wd);

// O(n^2) dominance on the three axes.
std::vector<std::size_t> brute_front(std::span<const CandidatePoint> c);

// Fraction of the reference box dominated, times its volume.
double monte_carlo_hypervolume(std::span<const Objective> pts, const Objective& ref,
                               std::size_t samples, std::mt19937_64& rng);

// Inclusion-exclusion over every subset (n <= 16).
double inclusion_exclusion_hypervolume(std::span<const Objective> pts, const Objective& ref);

}  // namespace lfm::testing
