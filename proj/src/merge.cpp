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

#include "lfm/merge.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <nlohmann/json.hpp>

#include "lfm/error.hpp"

namespace lfm {
namespace {

std::vector<double> resolve_weights(std::span<const double> weights, std::size_t n) {
  if (n == 0) throw InputError("merge needs at least one model");
  if (weights.empty()) return std::vector<double>(n, 1.0);
  if (weights.size() != n) {
    throw ConfigError("merge: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(n) + " models");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ConfigError("merge: weights must be finite");
  }
  return {weights.begin(), weights.end()};
}

void check_inputs(const Checkpoint* base, std::span<const Checkpoint> models) {
  std::vector<std::reference_wrapper<const Checkpoint>> all;
  if (base) all.emplace_back(*base);
  for (const auto& m : models) all.emplace_back(m);
  require_compatible(all);
}

std::vector<double> delta_of(const Tensor& model, const Tensor& base) {
  std::vector<double> d(model.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = double(model[i]) - double(base[i]);
  return d;
}

Tensor apply_delta(const Tensor& base, const std::vector<double>& delta) {
  Tensor out(base.shape());
  for (std::size_t i = 0; i < delta.size(); ++i) out[i] = float(double(base[i]) + delta[i]);
  return out;
}

// Orders indices by descending magnitude, ties to the lower index.
std::vector<std::size_t> magnitude_order(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v[a]) > std::abs(v[b]);
  });
  return idx;
}

std::vector<double> weighted_sum(const std::vector<std::vector<double>>& deltas,
                                 std::span<const double> weights) {
  std::vector<double> out(deltas.front().size(), 0.0);
  for (std::size_t m = 0; m < deltas.size(); ++m) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[m] * deltas[m][i];
  }
  return out;
}

// Applies fn(name, per-model deltas) to every tensor and adds the result to base.
template <typename Fn>
Checkpoint map_deltas(const Checkpoint& base, std::span<const Checkpoint> models, Fn&& fn) {
  check_inputs(&base, models);
  Checkpoint out;
  for (const auto& [name, b] : base) {
    std::vector<std::vector<double>> deltas;
    deltas.reserve(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
      deltas.push_back(delta_of(models[m].find(name)->second, b));
    }
    out.emplace(name, apply_delta(b, fn(name, deltas)));
  }
  return out;
}

// Bernoulli drop with per-entry probability, survivors rescaled.
void random_drop(std::vector<double>& delta, std::span<const double> probs, RngSeed seed,
                 std::string_view name, std::size_t model_index) {
  auto gen = stream_for(seed, name, model_index);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double u = uniform01(gen);
    delta[i] = u < probs[i] ? 0.0 : delta[i] / (1.0 - probs[i]);
  }
}

}  // namespace

std::string_view method_name(MergeMethod m) {
  switch (m) {
    case MergeMethod::soup: return "soup";
    case MergeMethod::task_arithmetic: return "task_arithmetic";
    case MergeMethod::ties: return "ties";
    case MergeMethod::dare_linear: return "dare_linear";
    case MergeMethod::dare_ties: return "dare_ties";
    case MergeMethod::della: return "della";
  }
  return "unknown";
}

MergeMethod parse_merge_method(std::string_view name) {
  for (auto m : {MergeMethod::soup, MergeMethod::task_arithmetic, MergeMethod::ties,
                 MergeMethod::dare_linear, MergeMethod::dare_ties, MergeMethod::della}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown merge method '" + std::string(name) + "'");
}

void MergeSpec::validate(std::size_t n_models) const {
  resolve_weights(weights, n_models);
  if (method == MergeMethod::ties && !(density > 0.0 && density <= 1.0)) {
    throw ConfigError("ties density must lie in (0, 1]");
  }
  const bool drops = method == MergeMethod::dare_linear || method == MergeMethod::dare_ties ||
                     method == MergeMethod::della;
  if (drops && !(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw ConfigError("drop rate must lie in [0, 1)");
  }
  if (method == MergeMethod::della) {
    if (!(epsilon >= 0.0)) throw ConfigError("della epsilon must be non-negative");
    if (drop_rate - epsilon / 2.0 < 0.0 || drop_rate + epsilon / 2.0 >= 1.0) {
      throw ConfigError("della needs p - eps/2 >= 0 and p + eps/2 < 1");
    }
  }
}

MergeSpec merge_spec_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MergeSpec s;
    s.method = parse_merge_method(j.at("method").get<std::string>());
    s.weights = j.value("weights", std::vector<double>{});
    s.density = j.value("density", 1.0);
    s.drop_rate = j.value("drop_rate", 0.0);
    s.epsilon = j.value("epsilon", 0.0);
    s.seed.value = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("merge spec: ") + e.what());
  }
}

Checkpoint soup(std::span<const Checkpoint> models, std::span<const double> weights) {
  auto w = resolve_weights(weights, models.size());
  check_inputs(nullptr, models);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("soup weights must have a positive sum");
  for (auto& x : w) x /= total;
  Checkpoint out;
  for (const auto& [name, first] : models.front()) {
    Tensor t(first.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      double acc = 0.0;
      for (std::size_t m = 0; m < models.size(); ++m) {
        acc += w[m] * double(models[m].find(name)->second[i]);
      }
      t[i] = float(acc);
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

Checkpoint task_arithmetic(const Checkpoint& base, std::span<const Checkpoint> models,
                           std::span<const double> weights) {
  const auto w = resolve_weights(weights, models.size());
  return map_deltas(base, models, [&](std::string_view, const auto& deltas) {
    return weighted_sum(deltas, w);
  });
}

void trim_to_density(std::span<double> values, double density) {
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
  const std::size_t n = values.size();
  // Shave rounding noise so that e.g. 0.1 * 30 keeps 3, not 4.
  auto keep = std::size_t(std::ceil(density * double(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);
  const auto order = magnitude_order(values);
  for (std::size_t r = keep; r < n; ++r) values[order[r]] = 0.0;
}

std::vector<double> della_drop_probabilities(std::span<const double> delta, double drop_rate,
                                             double epsilon) {
  const std::size_t n = delta.size();
  const auto order = magnitude_order(delta);
  std::vector<double> p(n);
  for (std::size_t r = 0; r < n; ++r) {
    p[order[r]] = drop_rate + epsilon * (2.0 * double(r) - double(n)) / (2.0 * double(n));
  }
  return p;
}

std::vector<double> elect_and_merge(const std::vector<std::vector<double>>& deltas,
                                    std::span<const double> weights) {
  const std::size_t n = deltas.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double vote = 0.0;
    for (const auto& d : deltas) vote += d[i];
    const bool positive = vote >= 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < deltas.size(); ++m) {
      const double v = deltas[m][i];
      if (v != 0.0 && (v > 0.0) == positive) {
        num += weights[m] * v;
        den += weights[m];
      }
    }
    if (den != 0.0) out[i] = num / den;
  }
  return out;
}

Checkpoint ties(const Checkpoint& base, std::span<const Checkpoint> models,
                std::span<const double> weights, double density) {
  const auto w = resolve_weights(weights, models.size());
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("ties density must lie in (0, 1]");
  return map_deltas(base, models, [&](std::string_view, auto deltas) {
    for (auto& d : deltas) trim_to_density(d, density);
    return elect_and_merge(deltas, w);
  });
}

Checkpoint dare(const Checkpoint& base, std::span<const Checkpoint> models,
                std::span<const double> weights, double drop_rate, DareMode mode,
                RngSeed seed) {
  const auto w = resolve_weights(weights, models.size());
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop rate must lie in [0, 1)");
  return map_deltas(base, models, [&](std::string_view name, auto deltas) {
    for (std::size_t m = 0; m < deltas.size(); ++m) {
      const std::vector<double> probs(deltas[m].size(), drop_rate);
      random_drop(deltas[m], probs, seed, name, m);
    }
    return mode == DareMode::linear ? weighted_sum(deltas, w) : elect_and_merge(deltas, w);
  });
}

Checkpoint della(const Checkpoint& base, std::span<const Checkpoint> models,
                 std::span<const double> weights, double drop_rate, double epsilon,
                 RngSeed seed) {
  MergeSpec spec;
  spec.method = MergeMethod::della;
  spec.drop_rate = drop_rate;
  spec.epsilon = epsilon;
  spec.validate(models.size());
  const auto w = resolve_weights(weights, models.size());
  return map_deltas(base, models, [&](std::string_view name, auto deltas) {
    for (std::size_t m = 0; m < deltas.size(); ++m) {
      const auto probs = della_drop_probabilities(deltas[m], drop_rate, epsilon);
      random_drop(deltas[m], probs, seed, name, m);
    }
    return elect_and_merge(deltas, w);
  });
}

Checkpoint merge(const MergeSpec& spec, const Checkpoint* base,
                 std::span<const Checkpoint> models) {
  spec.validate(models.size());
  if (spec.needs_base() && base == nullptr) {
    throw ConfigError(std::string(method_name(spec.method)) + " needs a base checkpoint");
  }
  switch (spec.method) {
    case MergeMethod::soup: return soup(models, spec.weights);
    case MergeMethod::task_arithmetic: return task_arithmetic(*base, models, spec.weights);
    case MergeMethod::ties: return ties(*base, models, spec.weights, spec.density);
    case MergeMethod::dare_linear:
      return dare(*base, models, spec.weights, spec.drop_rate, DareMode::linear, spec.seed);
    case MergeMethod::dare_ties:
      return dare(*base, models, spec.weights, spec.drop_rate, DareMode::ties_consensus,
                  spec.seed);
    case MergeMethod::della:
      return della(*base, models, spec.weights, spec.drop_rate, spec.epsilon, spec.seed);
  }
  throw ConfigError("unhandled merge method");
}

}  // namespace lfm
