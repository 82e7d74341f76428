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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfm/checkpoint.hpp"
#include "lfm/rng.hpp"

namespace lfm {

enum class MergeMethod { soup, task_arithmetic, ties, dare_linear, dare_ties, della };

std::string_view method_name(MergeMethod m);
MergeMethod parse_merge_method(std::string_view name);  // ConfigError on unknown

struct MergeSpec {
  MergeMethod method = MergeMethod::soup;
  std::vector<double> weights;
  double density = 1.0;    // TIES keep fraction, in (0, 1]
  double drop_rate = 0.0;  // DARE / DELLA mean drop probability, in [0, 1)
  double epsilon = 0.0;    // DELLA spread
  RngSeed seed{0};

  // Throws ConfigError; an empty weight list means equal weights of 1.
  void validate(std::size_t n_models) const;
  bool needs_base() const { return method != MergeMethod::soup; }
};

MergeSpec merge_spec_from_json(std::string_view text);

Checkpoint soup(std::span<const Checkpoint> models, std::span<const double> weights);

Checkpoint task_arithmetic(const Checkpoint& base, std::span<const Checkpoint> models,
                           std::span<const double> weights);

Checkpoint ties(const Checkpoint& base, std::span<const Checkpoint> models,
                std::span<const double> weights, double density);

enum class DareMode { linear, ties_consensus };

Checkpoint dare(const Checkpoint& base, std::span<const Checkpoint> models,
                std::span<const double> weights, double drop_rate, DareMode mode,
                RngSeed seed);

Checkpoint della(const Checkpoint& base, std::span<const Checkpoint> models,
                 std::span<const double> weights, double drop_rate, double epsilon,
                 RngSeed seed);

// Dispatches on spec.method; base may be null only for soup.
Checkpoint merge(const MergeSpec& spec, const Checkpoint* base,
                 std::span<const Checkpoint> models);

// Building blocks, exposed for testing.

// Keeps the ceil(density * n) largest magnitudes (ties to the lower index).
void trim_to_density(std::span<double> values, double density);

// Per-entry drop probabilities p + eps * (2 r - n) / (2 n), r the magnitude
// rank (0 = largest, ties to the lower index); returned in entry order.
std::vector<double> della_drop_probabilities(std::span<const double> delta, double drop_rate,
                                             double epsilon);

// Sign election on the unweighted sum, then the weighted mean of agreeing
// entries. Zero entries cast no vote; a zero net vote elects +.
std::vector<double> elect_and_merge(const std::vector<std::vector<double>>& deltas,
                                    std::span<const double> weights);

}  // namespace lfm
