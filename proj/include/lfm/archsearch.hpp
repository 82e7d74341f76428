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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lfm {

struct CandidatePoint {
  std::string id;
  double quality = 0.0;  // higher is better
  double ttft_ms = 0.0;
  double decode_ms_p50 = 0.0;
  double decode_ms_p95 = 0.0;
  double peak_mem_bytes = 0.0;

  void validate() const;  // InputError unless finite and non-negative
};

struct BudgetSpec {
  double max_ttft_ms = 0.0;
  double max_decode_ms = 0.0;
  double max_peak_mem_bytes = 0.0;

  void validate() const;  // ConfigError unless positive
};

// Thresholds are inclusive; decode latency is checked at p95.
std::vector<CandidatePoint> filter_budgets(std::span<const CandidatePoint> cands,
                                           const BudgetSpec& budget);

// Axes: quality up, decode p50 down, peak memory down.
bool dominates(const CandidatePoint& a, const CandidatePoint& b);

// Non-dominated subset in input order.
std::vector<CandidatePoint> pareto_front(std::span<const CandidatePoint> cands);

// Maximization frame: (quality, -decode_ms_p50, -peak_mem_bytes).
using Objective = std::array<double, 3>;

Objective to_objective(const CandidatePoint& c);

inline constexpr std::size_t kMaxHypervolumePoints = 64;

// Exact dominated volume. Every point must be >= the reference on all axes
// (InputError naming the offender); more than 64 non-dominated points
// raise CapacityError.
double hypervolume(std::span<const Objective> points, const Objective& reference,
                   std::span<const std::string> ids = {});

// Componentwise worst minus a 1% margin (of |worst|, or of the range when worst is 0).
Objective default_reference(std::span<const Objective> points);

struct HviEntry {
  std::string id;
  double hvi = 0.0;
};

// Descending by improvement, ties by id.
std::vector<HviEntry> rank_by_hvi(std::span<const CandidatePoint> front,
                                  std::span<const CandidatePoint> pool,
                                  const Objective& reference);

struct CurriculumMatrix {
  std::size_t n_items = 0;
  std::size_t n_models = 0;
  std::vector<std::uint8_t> outcomes;  // row-major [n_items, n_models], entries 0 or 1

  void validate() const;  // InputError
  std::uint8_t at(std::size_t i, std::size_t j) const { return outcomes[i * n_models + j]; }
};

struct CurriculumResult {
  std::vector<double> success_rate;
  std::vector<std::size_t> order;  // easiest first, ties by index
};

CurriculumResult curriculum_order(const CurriculumMatrix& matrix);

std::vector<CandidatePoint> read_candidates_jsonl(std::istream& is);
BudgetSpec budget_from_json(std::string_view text);
// One JSON array of 0/1 per line.
CurriculumMatrix read_curriculum_jsonl(std::istream& is);

}  // namespace lfm
