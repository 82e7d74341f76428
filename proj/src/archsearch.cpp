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

#include "lfm/archsearch.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "lfm/error.hpp"

namespace lfm {
namespace {

bool weakly_dominates(const Objective& a, const Objective& b) {
  return a[0] >= b[0] && a[1] >= b[1] && a[2] >= b[2];
}

// Non-dominated, deduplicated, canonically ordered.
std::vector<Objective> reduce(std::span<const Objective> points) {
  std::vector<Objective> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<Objective> out;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : pts) {
      if (q != p && weakly_dominates(q, p)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(p);
  }
  return out;
}

// Area dominated in the first two axes; pts sorted by axis 0 descending.
double area_2d(std::vector<std::array<double, 2>> pts, double rx, double ry) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
  });
  double area = 0.0, max_y = ry;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    max_y = std::max(max_y, pts[i][1]);
    const double next_x = i + 1 < pts.size() ? pts[i + 1][0] : rx;
    area += (pts[i][0] - next_x) * (max_y - ry);
  }
  return area;
}

}  // namespace

void CandidatePoint::validate() const {
  for (double v : {quality, ttft_ms, decode_ms_p50, decode_ms_p95, peak_mem_bytes}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InputError("candidate '" + id + "': metrics must be finite and non-negative");
    }
  }
}

void BudgetSpec::validate() const {
  for (double v : {max_ttft_ms, max_decode_ms, max_peak_mem_bytes}) {
    if (!(v > 0.0)) throw ConfigError("budget thresholds must be positive");
  }
}

std::vector<CandidatePoint> filter_budgets(std::span<const CandidatePoint> cands,
                                           const BudgetSpec& budget) {
  budget.validate();
  std::vector<CandidatePoint> out;
  for (const auto& c : cands) {
    if (c.ttft_ms <= budget.max_ttft_ms && c.decode_ms_p95 <= budget.max_decode_ms &&
        c.peak_mem_bytes <= budget.max_peak_mem_bytes) {
      out.push_back(c);
    }
  }
  return out;
}

bool dominates(const CandidatePoint& a, const CandidatePoint& b) {
  const bool no_worse = a.quality >= b.quality && a.decode_ms_p50 <= b.decode_ms_p50 &&
                        a.peak_mem_bytes <= b.peak_mem_bytes;
  const bool better = a.quality > b.quality || a.decode_ms_p50 < b.decode_ms_p50 ||
                      a.peak_mem_bytes < b.peak_mem_bytes;
  return no_worse && better;
}

std::vector<CandidatePoint> pareto_front(std::span<const CandidatePoint> cands) {
  std::vector<CandidatePoint> out;
  for (const auto& c : cands) {
    const bool dominated =
        std::any_of(cands.begin(), cands.end(), [&](const auto& o) { return dominates(o, c); });
    if (!dominated) out.push_back(c);
  }
  return out;
}

Objective to_objective(const CandidatePoint& c) {
  return {c.quality, -c.decode_ms_p50, -c.peak_mem_bytes};
}

double hypervolume(std::span<const Objective> points, const Objective& reference,
                   std::span<const std::string> ids) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (!std::isfinite(points[i][k]) || points[i][k] < reference[k]) {
        const std::string name = i < ids.size() ? "'" + ids[i] + "'" : "#" + std::to_string(i);
        throw InputError("point " + name + " does not dominate the reference point");
      }
    }
  }
  auto pts = reduce(points);
  if (pts.size() > kMaxHypervolumePoints) {
    throw CapacityError("hypervolume: " + std::to_string(pts.size()) +
                        " non-dominated points exceed the exact limit of 64");
  }
  // Slice along axis 2 from the top; each slab is a 2-D union.
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[2] != b[2] ? a[2] > b[2] : a < b;
  });
  double volume = 0.0;
  std::vector<std::array<double, 2>> active;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    active.push_back({pts[i][0], pts[i][1]});
    const double next_z = i + 1 < pts.size() ? pts[i + 1][2] : reference[2];
    const double height = pts[i][2] - next_z;
    if (height > 0.0) volume += height * area_2d(active, reference[0], reference[1]);
  }
  return volume;
}

Objective default_reference(std::span<const Objective> points) {
  if (points.empty()) throw InputError("default_reference: no points");
  Objective ref{};
  for (std::size_t k = 0; k < 3; ++k) {
    double lo = points[0][k], hi = points[0][k];
    for (const auto& p : points) lo = std::min(lo, p[k]), hi = std::max(hi, p[k]);
    double margin = 0.01 * std::abs(lo);
    if (margin == 0.0) margin = hi > lo ? 0.01 * (hi - lo) : 0.01;
    ref[k] = lo - margin;
  }
  return ref;
}

std::vector<HviEntry> rank_by_hvi(std::span<const CandidatePoint> front,
                                  std::span<const CandidatePoint> pool,
                                  const Objective& reference) {
  std::vector<Objective> base;
  std::vector<std::string> ids;
  for (const auto& c : front) base.push_back(to_objective(c)), ids.push_back(c.id);
  const double hv0 = hypervolume(base, reference, ids);
  std::vector<HviEntry> out;
  for (const auto& c : pool) {
    auto pts = base;
    auto names = ids;
    pts.push_back(to_objective(c));
    names.push_back(c.id);
    out.push_back({c.id, std::max(0.0, hypervolume(pts, reference, names) - hv0)});
  }
  std::sort(out.begin(), out.end(), [](const HviEntry& a, const HviEntry& b) {
    return a.hvi != b.hvi ? a.hvi > b.hvi : a.id < b.id;
  });
  return out;
}

void CurriculumMatrix::validate() const {
  if (n_models == 0) throw InputError("curriculum: need at least one model column");
  if (outcomes.size() != n_items * n_models) throw InputError("curriculum: ragged matrix");
  for (auto v : outcomes) {
    if (v > 1) throw InputError("curriculum: outcomes must be 0 or 1");
  }
}

CurriculumResult curriculum_order(const CurriculumMatrix& matrix) {
  matrix.validate();
  CurriculumResult res;
  std::vector<std::size_t> solved(matrix.n_items, 0);
  for (std::size_t i = 0; i < matrix.n_items; ++i) {
    for (std::size_t j = 0; j < matrix.n_models; ++j) solved[i] += matrix.at(i, j);
    res.success_rate.push_back(double(solved[i]) / double(matrix.n_models));
  }
  res.order.resize(matrix.n_items);
  std::iota(res.order.begin(), res.order.end(), std::size_t{0});
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](std::size_t a, std::size_t b) { return solved[a] > solved[b]; });
  return res;
}

std::vector<CandidatePoint> read_candidates_jsonl(std::istream& is) {
  std::vector<CandidatePoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CandidatePoint c;
      c.id = j.at("id").get<std::string>();
      c.quality = j.at("quality").get<double>();
      c.ttft_ms = j.at("ttft_ms").get<double>();
      c.decode_ms_p50 = j.at("decode_ms_p50").get<double>();
      c.decode_ms_p95 = j.at("decode_ms_p95").get<double>();
      c.peak_mem_bytes = j.at("peak_mem_bytes").get<double>();
      c.validate();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

BudgetSpec budget_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BudgetSpec b;
    b.max_ttft_ms = j.at("max_ttft_ms").get<double>();
    b.max_decode_ms = j.at("max_decode_ms").get<double>();
    b.max_peak_mem_bytes = j.at("max_peak_mem_bytes").get<double>();
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("budget: ") + e.what());
  }
}

CurriculumMatrix read_curriculum_jsonl(std::istream& is) {
  CurriculumMatrix m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto row = nlohmann::json::parse(line).get<std::vector<int>>();
      if (m.n_items == 0) m.n_models = row.size();
      if (row.size() != m.n_models || row.empty()) {
        throw InputError("expected " + std::to_string(m.n_models) + " outcomes");
      }
      for (int v : row) {
        if (v != 0 && v != 1) throw InputError("outcomes must be 0 or 1");
        m.outcomes.push_back(std::uint8_t(v));
      }
      ++m.n_items;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

}  // namespace lfm
