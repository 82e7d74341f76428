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

#include "cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

#include "lfm/error.hpp"

namespace lfm::cli {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<TokenId> random_prompt(const Model& model, RngSeed seed, std::size_t len) {
  auto gen = stream_for(seed, "bench.prompt", len);
  std::uniform_int_distribution<TokenId> dist(0, TokenId(model.config().vocab_size - 1));
  std::vector<TokenId> out(len);
  for (auto& t : out) t = dist(gen);
  return out;
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

struct Prefilled {
  BenchRun run;
  SessionState state;
  TokenId next = 0;
};

Prefilled timed_prefill(const Model& model, std::span<const TokenId> prompt) {
  Prefilled out;
  const auto t0 = Clock::now();
  auto pre = prefill(model, prompt);
  out.run.prefill_seconds = seconds_since(t0);
  out.run.prefill_tok_per_s = double(prompt.size()) / out.run.prefill_seconds;
  out.next = TokenId(argmax(pre.logits.row(pre.logits.rows() - 1)));
  out.state = std::move(pre.state);
  return out;
}

void timed_decode(const Model& model, Prefilled& p, std::size_t n_decode) {
  auto token = p.next;
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < n_decode; ++i) {
    const Tensor logits = decode_step(model, token, p.state);
    token = TokenId(argmax(logits.data()));
  }
  p.run.decode_seconds = seconds_since(t0);
  p.run.decode_tok_per_s = n_decode > 0 ? double(n_decode) / p.run.decode_seconds : 0.0;
  p.run.state_bytes = p.state.state_bytes();
}

}  // namespace

BenchRun time_once(const Model& model, std::span<const TokenId> prompt, std::size_t n_decode) {
  auto p = timed_prefill(model, prompt);
  timed_decode(model, p, n_decode);
  return p.run;
}

BenchReport run_bench(const Model& model, const BenchOptions& options) {
  if (options.repeats == 0) throw InputError("bench: repeats must be at least 1");
  if (options.contexts.empty()) throw InputError("bench: no context lengths given");
  const std::size_t limit = model.config().context_limit;
  for (auto len : options.contexts) {
    if (len == 0) throw InputError("bench: context lengths must be positive");
    if (len + options.n_decode > limit) {
      throw CapacityError("bench: context " + std::to_string(len) + " plus " +
                          std::to_string(options.n_decode) +
                          " decode tokens exceeds the context limit " + std::to_string(limit));
    }
  }
  BenchReport report;
  report.model = model.config().name;
  report.n_decode = options.n_decode;
  report.repeats = options.repeats;
  std::vector<std::vector<TokenId>> prompts;
  for (auto len : options.contexts) {
    prompts.push_back(random_prompt(model, options.seed, len));
    report.points.push_back(BenchPoint{len, 0.0, 0.0, 0, {}});
  }
  for (const auto& prompt : prompts) {
    for (std::size_t w = 0; w < options.warmup; ++w) time_once(model, prompt, options.n_decode);
  }
  // Each repeat prefills every context first, then decodes them back to back
  // in alternating order, so drift in machine load hits every context alike.
  for (std::size_t r = 0; r < options.repeats; ++r) {
    std::vector<Prefilled> ready;
    for (const auto& prompt : prompts) ready.push_back(timed_prefill(model, prompt));
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const std::size_t c = r % 2 == 0 ? i : prompts.size() - 1 - i;
      timed_decode(model, ready[c], options.n_decode);
    }
    for (std::size_t c = 0; c < prompts.size(); ++c) report.points[c].runs.push_back(ready[c].run);
  }
  for (auto& point : report.points) {
    std::vector<double> pre, dec;
    for (const auto& run : point.runs) {
      pre.push_back(run.prefill_tok_per_s);
      dec.push_back(run.decode_tok_per_s);
      point.state_bytes = std::max(point.state_bytes, run.state_bytes);
    }
    point.prefill_tok_per_s = median(pre);
    point.decode_tok_per_s = median(dec);
    report.peak_state_bytes = std::max(report.peak_state_bytes, point.state_bytes);
  }
  return report;
}

void print_bench_table(const BenchReport& report, std::ostream& os, bool with_runs) {
  os << "model " << report.model << "  (batch 1, " << report.n_decode << " decode tokens, median of "
     << report.repeats << ")\n";
  char line[160];
  std::snprintf(line, sizeof line, "%10s %16s %16s %14s\n", "context", "prefill tok/s",
                "decode tok/s", "state bytes");
  os << line;
  for (const auto& p : report.points) {
    std::snprintf(line, sizeof line, "%10zu %16.1f %16.1f %14zu\n", p.context,
                  p.prefill_tok_per_s, p.decode_tok_per_s, p.state_bytes);
    os << line;
    if (!with_runs) continue;
    for (std::size_t r = 0; r < p.runs.size(); ++r) {
      os << "    run " << r << ": prefill " << format("%.1f", p.runs[r].prefill_tok_per_s)
         << " tok/s, decode " << format("%.1f", p.runs[r].decode_tok_per_s) << " tok/s\n";
    }
  }
  os << "peak state bytes " << report.peak_state_bytes << "\n";
}

nlohmann::json bench_to_json(const BenchReport& report, bool with_runs) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["model"] = report.model;
  j["batch"] = 1;
  j["n_decode"] = report.n_decode;
  j["repeats"] = report.repeats;
  j["peak_state_bytes"] = report.peak_state_bytes;
  j["points"] = nlohmann::json::array();
  for (const auto& p : report.points) {
    nlohmann::json jp{{"context", p.context},
                      {"prefill_tok_per_s", p.prefill_tok_per_s},
                      {"decode_tok_per_s", p.decode_tok_per_s},
                      {"state_bytes", p.state_bytes}};
    if (with_runs) {
      jp["runs"] = nlohmann::json::array();
      for (const auto& r : p.runs) {
        jp["runs"].push_back({{"prefill_seconds", r.prefill_seconds},
                              {"decode_seconds", r.decode_seconds},
                              {"prefill_tok_per_s", r.prefill_tok_per_s},
                              {"decode_tok_per_s", r.decode_tok_per_s}});
      }
    }
    j["points"].push_back(std::move(jp));
  }
  return j;
}

}  // namespace lfm::cli
