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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lfm/archsearch.hpp"
#include "lfm/error.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace lfm;
using lfm::testing::Gen;
namespace oracle = lfm::testing;

namespace {

CandidatePoint point(std::string id, double q, double p50, double mem, double ttft = 1.0,
                     double p95 = -1.0) {
  return {std::move(id), q, ttft, p50, p95 < 0 ? p50 : p95, mem};
}

std::vector<CandidatePoint> random_candidates(Gen& g, std::size_t n, bool coarse = false) {
  std::vector<CandidatePoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse grids produce ties and duplicates.
    const auto v = [&](double lo, double hi) {
      return coarse ? double(g.index(0, 3)) : g.uniform(lo, hi);
    };
    out.push_back(point("c" + std::to_string(i), v(0, 1), v(1, 20), v(1, 100), g.uniform(1, 50)));
  }
  return out;
}

std::vector<Objective> objectives(std::span<const CandidatePoint> c) {
  std::vector<Objective> o;
  for (const auto& p : c) o.push_back(to_objective(p));
  return o;
}

std::vector<Objective> random_objectives(Gen& g, std::size_t n) {
  std::vector<Objective> o(n);
  for (auto& p : o) p = {g.uniform(0, 1), g.uniform(0, 1), g.uniform(0, 1)};
  return o;
}

}  // namespace

TEST_CASE("budget filter is inclusive and uses the p95 decode latency") {
  const BudgetSpec b{10.0, 5.0, 1000.0};
  const std::vector<CandidatePoint> edge{point("edge", 0.5, 4.0, 1000.0, 10.0, 5.0)};
  CHECK(filter_budgets(edge, b).size() == 1);
  const std::vector<CandidatePoint> tail{point("tail", 0.5, 4.0, 10.0, 1.0, 5.01)};
  CHECK(filter_budgets(tail, b).empty());
  CHECK(filter_budgets(std::vector<CandidatePoint>{}, b).empty());
  const std::vector<CandidatePoint> three{point("a", 0.5, 1, 10), point("b", 0.6, 1, 1001),
                                          point("c", 0.7, 2, 999)};
  const auto kept = filter_budgets(three, b);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "a");
  CHECK(kept[1].id == "c");
  CHECK_THROWS_AS((BudgetSpec{0.0, 1.0, 1.0}.validate()), ConfigError);
}

TEST_CASE("pareto front examples") {
  const std::vector<CandidatePoint> one{point("x", 0.1, 1, 1)};
  CHECK(pareto_front(one).size() == 1);
  const std::vector<CandidatePoint> ab{point("a", 0.9, 10, 100), point("b", 0.8, 12, 120)};
  const auto f = pareto_front(ab);
  REQUIRE(f.size() == 1);
  CHECK(f[0].id == "a");
  CHECK(dominates(ab[0], ab[1]));
  CHECK_FALSE(dominates(ab[1], ab[0]));
  CHECK_FALSE(dominates(ab[0], ab[0]));
}

TEST_CASE("pareto front equals the brute-force oracle") {
  Gen g(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_candidates(g, g.index(0, 64), trial % 2 == 0);
    const auto front = pareto_front(c);
    const auto want = oracle::brute_front(c);
    REQUIRE(front.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(front[i].id == c[want[i]].id);
  }
}

TEST_CASE("hypervolume closed forms") {
  const std::vector<Objective> box{{3, 2, 5}};
  CHECK(hypervolume(box, {1, 1, 1}) == 2.0 * 1.0 * 4.0);
  const std::vector<Objective> two{{2, 1, 1}, {1, 2, 1}};
  CHECK(hypervolume(two, {0, 0, 0}) == 3.0);
  CHECK(hypervolume(std::vector<Objective>{}, {0, 0, 0}) == 0.0);
}

TEST_CASE("hypervolume matches inclusion-exclusion") {
  Gen g(2);
  for (int trial = 0; trial < 300; ++trial) {
    auto pts = random_objectives(g, g.index(1, 12));
    if (trial % 3 == 0) {
      for (auto& p : pts) {
        for (auto& x : p) x = std::round(x * 4) / 4;  // ties and duplicates
      }
    }
    const Objective ref{-0.1, -0.2, -0.05};
    const double got = hypervolume(pts, ref);
    const double want = oracle::inclusion_exclusion_hypervolume(pts, ref);
    CHECK(got == doctest::Approx(want).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("hypervolume agrees with Monte Carlo sampling") {
  Gen g(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pts = random_objectives(g, 5);
    const Objective ref{0, 0, 0};
    const double mc = oracle::monte_carlo_hypervolume(pts, ref, 1000000, g.engine());
    CHECK(std::abs(hypervolume(pts, ref) - mc) <= 0.01 * hypervolume(pts, ref));
  }
}

TEST_CASE("hypervolume is monotone and order invariant") {
  Gen g(4);
  for (int trial = 0; trial < 300; ++trial) {
    auto pts = random_objectives(g, g.index(1, 40));
    const Objective ref{-0.01, -0.01, -0.01};
    const double hv = hypervolume(pts, ref);
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    CHECK(hypervolume(shuffled, ref) == hv);

    const auto extra = random_objectives(g, 1)[0];
    auto more = pts;
    more.push_back(extra);
    CHECK(hypervolume(more, ref) >= hv);

    const auto& base = pts[g.index(0, pts.size() - 1)];
    Objective dominated = base;
    for (auto& x : dominated) x -= g.uniform(0.0, 0.005);
    auto with_dominated = pts;
    with_dominated.push_back(dominated);
    CHECK(hypervolume(with_dominated, ref) == hv);
  }
}

TEST_CASE("hypervolume errors") {
  const std::vector<Objective> below{{1, 1, 1}, {-1, 2, 2}};
  const std::vector<std::string> ids{"good", "bad"};
  try {
    hypervolume(below, {0, 0, 0}, ids);
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  std::vector<Objective> wide;
  for (int i = 0; i <= 64; ++i) wide.push_back({double(i), double(64 - i), 1.0});
  CHECK_THROWS_AS(hypervolume(wide, {-1, -1, 0}), CapacityError);
  wide.pop_back();
  CHECK(hypervolume(wide, {-1, -1, 0}) > 0.0);
  // Dominated points do not count against the limit.
  for (int i = 0; i < 100; ++i) wide.push_back({0.0, 0.0, 0.5});
  CHECK_NOTHROW(hypervolume(wide, {-1, -1, 0}));
}

TEST_CASE("default reference sits just beyond the worst point") {
  const std::vector<Objective> pts{{0.5, -10, -100}, {0.9, -20, -50}};
  const auto r = default_reference(pts);
  CHECK(r[0] == doctest::Approx(0.5 - 0.005));
  CHECK(r[1] == doctest::Approx(-20.2));
  CHECK(r[2] == doctest::Approx(-101.0));
  for (const auto& p : pts) {
    for (int k = 0; k < 3; ++k) CHECK(p[k] > r[k]);
  }
  const std::vector<Objective> zero{{0, 0, 0}};
  const auto rz = default_reference(zero);
  for (int k = 0; k < 3; ++k) CHECK(rz[k] < 0.0);
}

TEST_CASE("hypervolume improvement ranking") {
  const std::vector<CandidatePoint> front{point("f1", 0.6, 5, 50), point("f2", 0.5, 3, 60),
                                          point("f3", 0.4, 2, 80)};
  const Objective ref{0.0, -10.0, -100.0};
  const std::vector<CandidatePoint> pool{point("dominated", 0.3, 6, 90),
                                         point("better", 0.9, 1, 10)};
  const auto ranked = rank_by_hvi(front, pool, ref);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].id == "better");
  CHECK(ranked[1].id == "dominated");
  CHECK(ranked[1].hvi == 0.0);
  const double full = hypervolume(std::vector<Objective>{to_objective(pool[1])}, ref);
  CHECK(ranked[0].hvi == doctest::Approx(full - hypervolume(objectives(front), ref)));
  CHECK(ranked[0].hvi > 0.0);

  Gen g(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = pareto_front(random_candidates(g, g.index(1, 8)));
    const auto p = random_candidates(g, g.index(1, 6));
    std::vector<CandidatePoint> all = f;
    all.insert(all.end(), p.begin(), p.end());
    const auto r = default_reference(objectives(all));
    const auto got = rank_by_hvi(f, p, r);
    const double base = oracle::inclusion_exclusion_hypervolume(objectives(f), r);
    std::vector<HviEntry> want;
    for (const auto& c : p) {
      auto with = objectives(f);
      with.push_back(to_objective(c));
      want.push_back({c.id, oracle::inclusion_exclusion_hypervolume(with, r) - base});
    }
    REQUIRE(got.size() == want.size());
    for (const auto& e : got) {
      const auto it = std::find_if(want.begin(), want.end(), [&](const HviEntry& w) { return w.id == e.id; });
      REQUIRE(it != want.end());
      CHECK(std::abs(e.hvi - it->hvi) <= 1e-9 * std::max(1.0, base));  // oracle rounds on the total
      CHECK(e.hvi >= 0.0);
    }
    for (std::size_t i = 1; i < got.size(); ++i) {
      CHECK((got[i - 1].hvi > got[i].hvi ||
             (got[i - 1].hvi == got[i].hvi && got[i - 1].id < got[i].id)));
    }
  }
}

TEST_CASE("curriculum success rates and ordering") {
  CurriculumMatrix m{3, 3, {1, 1, 0, 1, 1, 1, 0, 0, 0}};
  const auto r = curriculum_order(m);
  CHECK(r.success_rate[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.success_rate[1] == 1.0);
  CHECK(r.order == std::vector<std::size_t>{1, 0, 2});

  Gen g(6);
  for (int trial = 0; trial < 100; ++trial) {
    CurriculumMatrix x{10, 12, {}};
    for (std::size_t i = 0; i < 120; ++i) x.outcomes.push_back(std::uint8_t(g.coin(0.5)));
    const auto res = curriculum_order(x);
    std::vector<std::pair<int, std::size_t>> keyed;
    for (std::size_t i = 0; i < 10; ++i) {
      int wins = 0;
      for (std::size_t j = 0; j < 12; ++j) wins += x.at(i, j);
      keyed.push_back({-wins, i});
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(res.order[i] == keyed[i].second);

    std::vector<std::size_t> cols(12);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), g.engine());
    CurriculumMatrix y{10, 12, std::vector<std::uint8_t>(120)};
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < 12; ++j) y.outcomes[i * 12 + j] = x.at(i, cols[j]);
    }
    CHECK(curriculum_order(y).success_rate == res.success_rate);
  }
  CurriculumMatrix bad{1, 2, {1, 2}};
  CHECK_THROWS_AS(curriculum_order(bad), InputError);
}

TEST_CASE("line-delimited readers") {
  std::istringstream cands(
      R"({"id":"a","quality":0.5,"ttft_ms":3,"decode_ms_p50":2,"decode_ms_p95":4,"peak_mem_bytes":100})"
      "\n");
  const auto c = read_candidates_jsonl(cands);
  REQUIRE(c.size() == 1);
  CHECK(c[0].decode_ms_p95 == 4.0);
  std::istringstream broken("\n{\"id\":\"a\"}\n");
  try {
    read_candidates_jsonl(broken);
    FAIL("expected a parse error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream rows("[1,0,1]\n[0,0,1]\n");
  const auto m = read_curriculum_jsonl(rows);
  CHECK(m.n_items == 2);
  CHECK(m.n_models == 3);
  std::istringstream ragged("[1,0,1]\n[0,1]\n");
  CHECK_THROWS_AS(read_curriculum_jsonl(ragged), InputError);
  CHECK(budget_from_json(R"({"max_ttft_ms":1,"max_decode_ms":2,"max_peak_mem_bytes":3})")
            .max_decode_ms == 2.0);
  CHECK_THROWS_AS(budget_from_json("{}"), ConfigError);
}
