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
#include <vector>

#include <nlohmann/json.hpp>

#include "lfm/backbone.hpp"
#include "lfm/rng.hpp"

namespace lfm::cli {

struct BenchOptions {
  std::vector<std::size_t> contexts{1024, 4096};
  std::size_t n_decode = 100;
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  RngSeed seed{0};
};

struct BenchRun {
  double prefill_seconds = 0.0;
  double decode_seconds = 0.0;
  double prefill_tok_per_s = 0.0;
  double decode_tok_per_s = 0.0;
  std::size_t state_bytes = 0;
};

struct BenchPoint {
  std::size_t context = 0;
  double prefill_tok_per_s = 0.0;  // median over runs
  double decode_tok_per_s = 0.0;   // median over runs
  std::size_t state_bytes = 0;
  std::vector<BenchRun> runs;
};

struct BenchReport {
  std::string model;
  std::size_t n_decode = 0;
  std::size_t repeats = 0;
  std::size_t peak_state_bytes = 0;
  std::vector<BenchPoint> points;
};

double median(std::vector<double> values);

// Batch 1: prefill the prompt, then n_decode greedy single-token steps.
BenchRun time_once(const Model& model, std::span<const TokenId> prompt, std::size_t n_decode);

// Seeded random prompts; warmup runs are untimed.
BenchReport run_bench(const Model& model, const BenchOptions& options);

void print_bench_table(const BenchReport& report, std::ostream& os, bool with_runs);
nlohmann::json bench_to_json(const BenchReport& report, bool with_runs);

}  // namespace lfm::cli
