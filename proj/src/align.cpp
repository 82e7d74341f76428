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

#include "lfm/align.hpp"

#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>

#include "lfm/error.hpp"

namespace lfm {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void PreferenceTriple::validate() const {
  if (len_chosen < 1 || len_rejected < 1) throw InputError("response lengths must be >= 1");
  for (double v : {logp_policy_chosen, logp_policy_rejected, logp_ref_chosen, logp_ref_rejected}) {
    if (!std::isfinite(v) || v > 0.0) {
      throw InputError("log-probabilities must be finite and <= 0");
    }
  }
}

void AlignConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
  if (!std::isfinite(omega) || !std::isfinite(lambda) || !std::isfinite(margin)) {
    throw ConfigError("alignment weights and margin must be finite");
  }
}

double implicit_reward(const PreferenceTriple& t, Response which, double beta) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return which == Response::chosen ? beta * (t.logp_policy_chosen - t.logp_ref_chosen)
                                   : beta * (t.logp_policy_rejected - t.logp_ref_rejected);
}

AlignResult ln_align_loss(std::span<const PreferenceTriple> batch, const AlignConfig& config) {
  config.validate();
  if (batch.empty()) throw InputError("ln_align_loss: empty batch");
  const double inv_n = 1.0 / double(batch.size());
  AlignResult res;
  res.grads.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    t.validate();
    const double u_w = implicit_reward(t, Response::chosen, config.beta) / double(t.len_chosen);
    const double u_l = implicit_reward(t, Response::rejected, config.beta) / double(t.len_rejected);
    const double rel = u_w - u_l;
    const double s_w = sigmoid(u_w), s_l = sigmoid(u_l);
    const double abs = s_w - s_l;

    double value = 0.0, d_rel = 0.0, d_abs = 0.0;
    if (config.f == RelativeShape::log_sigmoid && config.omega != 0.0) {
      value += config.omega * log_sigmoid(rel - config.margin);
      d_rel = -config.omega * sigmoid(config.margin - rel);
    }
    if (config.g == AbsoluteShape::identity && config.lambda != 0.0) {
      value += config.lambda * abs;
      d_abs = -config.lambda;
    }
    res.loss -= value * inv_n;

    const double d_uw = (d_rel + d_abs * s_w * (1.0 - s_w)) * inv_n;
    const double d_ul = (-d_rel - d_abs * s_l * (1.0 - s_l)) * inv_n;
    auto& g = res.grads[i];
    g.policy_chosen = d_uw * config.beta / double(t.len_chosen);
    g.ref_chosen = -g.policy_chosen;
    g.policy_rejected = d_ul * config.beta / double(t.len_rejected);
    g.ref_rejected = -g.policy_rejected;
  }
  return res;
}

AlignConfig preset(std::string_view name) {
  AlignConfig c;
  c.beta = 5.0;
  if (name == "dpo_ln") {
    c.omega = 1.0, c.f = RelativeShape::log_sigmoid, c.margin = 0.0;
    c.lambda = 0.0, c.g = AbsoluteShape::zero;
  } else if (name == "apo_zero_ln") {
    c.omega = 0.0, c.f = RelativeShape::zero, c.margin = 0.0;
    c.lambda = 1.0, c.g = AbsoluteShape::identity;
  } else if (name == "joint") {
    c.omega = 1.0, c.f = RelativeShape::log_sigmoid, c.margin = 0.1;
    c.lambda = 0.2, c.g = AbsoluteShape::identity;
  } else {
    throw InputError("unknown alignment preset '" + std::string(name) +
                     "' (expected dpo_ln, apo_zero_ln or joint)");
  }
  return c;
}

std::vector<PreferenceTriple> read_preference_jsonl(std::istream& is) {
  std::vector<PreferenceTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PreferenceTriple t;
      t.logp_policy_chosen = j.at("logp_policy_chosen").get<double>();
      t.logp_policy_rejected = j.at("logp_policy_rejected").get<double>();
      t.logp_ref_chosen = j.at("logp_ref_chosen").get<double>();
      t.logp_ref_rejected = j.at("logp_ref_rejected").get<double>();
      t.len_chosen = j.at("len_chosen").get<std::size_t>();
      t.len_rejected = j.at("len_rejected").get<std::size_t>();
      t.prompt_len = j.value("prompt_len", std::size_t{0});
      t.validate();
      out.push_back(t);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lfm
