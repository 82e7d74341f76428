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

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lfm {

// Summed token log-probabilities of one preference pair.
struct PreferenceTriple {
  double logp_policy_chosen = 0.0;
  double logp_policy_rejected = 0.0;
  double logp_ref_chosen = 0.0;
  double logp_ref_rejected = 0.0;
  std::size_t len_chosen = 1;
  std::size_t len_rejected = 1;
  std::size_t prompt_len = 0;

  // Throws InputError unless lengths >= 1 and log-probabilities are finite and <= 0.
  void validate() const;
};

enum class RelativeShape { log_sigmoid, zero };
enum class AbsoluteShape { identity, zero };

struct AlignConfig {
  double omega = 1.0;
  RelativeShape f = RelativeShape::log_sigmoid;
  double margin = 0.0;
  double lambda = 0.0;
  AbsoluteShape g = AbsoluteShape::zero;
  double beta = 5.0;

  void validate() const;  // ConfigError
};

enum class Response { chosen, rejected };

double implicit_reward(const PreferenceTriple& t, Response which, double beta);

struct TripleGrad {
  double policy_chosen = 0.0;
  double policy_rejected = 0.0;
  double ref_chosen = 0.0;
  double ref_rejected = 0.0;
};

struct AlignResult {
  double loss = 0.0;
  std::vector<TripleGrad> grads;  // of the batch mean
};

AlignResult ln_align_loss(std::span<const PreferenceTriple> batch, const AlignConfig& config);

// dpo_ln, apo_zero_ln, joint.
AlignConfig preset(std::string_view name);

double log_sigmoid(double x);
double sigmoid(double x);

// One JSON object per line; blank lines skipped.
std::vector<PreferenceTriple> read_preference_jsonl(std::istream& is);

}  // namespace lfm
