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

#include "cli/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "cli/bench.hpp"
#include "cli/io.hpp"
#include "lfm/align.hpp"
#include "lfm/archsearch.hpp"
#include "lfm/checkpoint.hpp"
#include "lfm/distill.hpp"
#include "lfm/error.hpp"
#include "lfm/kernels.hpp"
#include "lfm/merge.hpp"
#include "lfm/retrieval.hpp"
#include "lfm/tokenizer.hpp"

namespace lfm::cli {
namespace {

constexpr int kSchemaVersion = 1;
constexpr double kFdStep = 1e-4;
constexpr double kGradFloor = 1e-8;
constexpr double kGradTolerance = 1e-4;

struct Globals {
  std::string config = "toy";
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool json = false;
  std::size_t repeats = 5;
  bool check_grad = false;

  std::optional<std::string> checkpoint_path() const {
    return checkpoint.empty() ? std::nullopt : std::optional<std::string>(checkpoint);
  }
  RngSeed rng() const { return RngSeed{seed}; }
};

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void emit_json(std::ostream& out, nlohmann::json j) {
  j["schema_version"] = kSchemaVersion;
  out << j.dump(2) << "\n";
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

void print_grad_check(std::ostream& out, double worst) {
  out << "grad_check max_rel_error " << fmt(worst, "%.3e") << " "
      << (worst <= kGradTolerance ? "ok" : "FAIL") << "\n";
}

// ---- loss -------------------------------------------------------------

struct LossOptions {
  std::string kind;
  std::string data;
  double tau = 2.0;
  std::size_t k = 32;
  std::string variant = "forward";
  std::string preset = "dpo_ln";
};

DtkResult dtk_dispatch(const std::string& variant, const Tensor& logits, const TopKRecord& r,
                       double tau) {
  if (variant == "forward") return dtk_loss(logits, r, tau);
  if (variant == "reverse_lb") return reverse_dtk_loss(logits, r, tau, ReverseVariant::lower_bound);
  if (variant == "reverse_tw") {
    return reverse_dtk_loss(logits, r, tau, ReverseVariant::teacher_weighted);
  }
  throw InputError("unknown dtk variant '" + variant + "' (forward, reverse_lb, reverse_tw)");
}

int cmd_loss_dtk(const Globals& g, const LossOptions& o, std::ostream& out) {
  auto in = open_input(o.data);
  const auto fixtures = read_dtk_jsonl(in, o.k);
  if (fixtures.empty()) throw InputError(o.data + ": no records");
  double binary = 0.0, conditional = 0.0, total = 0.0, worst = 0.0;
  std::size_t clamped = 0;
  for (const auto& f : fixtures) {
    const auto res = dtk_dispatch(o.variant, f.student_logits, f.record, o.tau);
    binary += res.breakdown.binary_term;
    conditional += res.breakdown.conditional_term;
    total += res.breakdown.total;
    clamped += res.breakdown.clamped ? 1 : 0;
    if (g.check_grad) {
      const auto fd = fd_gradient(
          [&](const Tensor& x) { return dtk_dispatch(o.variant, x, f.record, o.tau).breakdown.total; },
          f.student_logits, kFdStep);
      worst = std::max(worst, max_relative_error(res.grad.data(), fd.data(), kGradFloor));
    }
  }
  const double n = double(fixtures.size());
  if (g.json) {
    nlohmann::json j{{"kind", "dtk"},         {"variant", o.variant},
                     {"records", fixtures.size()}, {"tau", o.tau},
                     {"binary_term", binary / n}, {"conditional_term", conditional / n},
                     {"total", total / n},    {"clamped_records", clamped}};
    if (g.check_grad) j["grad_max_rel_error"] = worst;
    emit_json(out, j);
  } else {
    out << "dtk (" << o.variant << ", tau " << fmt(o.tau) << ") over " << fixtures.size()
        << " records\n"
        << "binary_term " << fmt(binary / n) << "\n"
        << "conditional_term " << fmt(conditional / n) << "\n"
        << "total " << fmt(total / n) << "\n"
        << "clamped_records " << clamped << "\n";
    if (g.check_grad) print_grad_check(out, worst);
  }
  return g.check_grad && worst > kGradTolerance ? 2 : 0;
}

std::vector<PreferenceTriple> triples_from(const std::vector<PreferenceTriple>& proto,
                                           const Tensor& x) {
  auto out = proto;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].logp_policy_chosen = x[4 * i + 0];
    out[i].logp_policy_rejected = x[4 * i + 1];
    out[i].logp_ref_chosen = x[4 * i + 2];
    out[i].logp_ref_rejected = x[4 * i + 3];
  }
  return out;
}

int cmd_loss_align(const Globals& g, const LossOptions& o, std::ostream& out) {
  auto in = open_input(o.data);
  const auto batch = read_preference_jsonl(in);
  const auto cfg = preset(o.preset);
  const auto res = ln_align_loss(batch, cfg);
  double worst = 0.0;
  if (g.check_grad) {
    Tensor x({4 * batch.size()});
    for (std::size_t i = 0; i < batch.size(); ++i) {
      x[4 * i + 0] = float(batch[i].logp_policy_chosen);
      x[4 * i + 1] = float(batch[i].logp_policy_rejected);
      x[4 * i + 2] = float(batch[i].logp_ref_chosen);
      x[4 * i + 3] = float(batch[i].logp_ref_rejected);
    }
    const auto at_x = ln_align_loss(triples_from(batch, x), cfg);
    Tensor analytic(x.shape());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      analytic[4 * i + 0] = float(at_x.grads[i].policy_chosen);
      analytic[4 * i + 1] = float(at_x.grads[i].policy_rejected);
      analytic[4 * i + 2] = float(at_x.grads[i].ref_chosen);
      analytic[4 * i + 3] = float(at_x.grads[i].ref_rejected);
    }
    const auto fd = fd_gradient(
        [&](const Tensor& t) { return ln_align_loss(triples_from(batch, t), cfg).loss; }, x,
        kFdStep);
    worst = max_relative_error(analytic.data(), fd.data(), kGradFloor);
  }
  if (g.json) {
    nlohmann::json j{{"kind", "align"}, {"preset", o.preset}, {"triples", batch.size()},
                     {"beta", cfg.beta}, {"loss", res.loss}};
    if (g.check_grad) j["grad_max_rel_error"] = worst;
    emit_json(out, j);
  } else {
    out << "align (" << o.preset << ", beta " << fmt(cfg.beta) << ") over " << batch.size()
        << " triples\n"
        << "loss " << fmt(res.loss) << "\n";
    if (g.check_grad) print_grad_check(out, worst);
  }
  return g.check_grad && worst > kGradTolerance ? 2 : 0;
}

int cmd_loss_retrieval(const Globals& g, const LossOptions& o, std::ostream& out) {
  auto in = open_input(o.data);
  const auto groups = read_scored_jsonl(in);
  if (groups.empty()) throw InputError(o.data + ": no records");
  double total = 0.0, worst = 0.0;
  for (const auto& c : groups) {
    const auto res = distill_mse_loss(c);
    total += res.loss;
    if (g.check_grad) {
      Tensor x({c.student_scores.size()});
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = float(c.student_scores[i]);
      auto at = [&](const Tensor& t) {
        ScoredCandidates s{c.teacher_scores, std::vector<double>(t.data().begin(), t.data().end())};
        return distill_mse_loss(s);
      };
      const auto analytic = at(x);
      Tensor a(x.shape());
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = float(analytic.grad[i]);
      const auto fd = fd_gradient([&](const Tensor& t) { return at(t).loss; }, x, kFdStep);
      worst = std::max(worst, max_relative_error(a.data(), fd.data(), kGradFloor));
    }
  }
  const double mean = total / double(groups.size());
  if (g.json) {
    nlohmann::json j{{"kind", "retrieval"}, {"groups", groups.size()}, {"loss", mean}};
    if (g.check_grad) j["grad_max_rel_error"] = worst;
    emit_json(out, j);
  } else {
    out << "retrieval mse over " << groups.size() << " groups\n"
        << "loss " << fmt(mean) << "\n";
    if (g.check_grad) print_grad_check(out, worst);
  }
  return g.check_grad && worst > kGradTolerance ? 2 : 0;
}

// ---- merge ------------------------------------------------------------

struct MergeOptions {
  std::string spec;
  std::string base;
  std::string output;
  std::vector<std::string> inputs;
};

int cmd_merge(const Globals& g, const MergeOptions& o, std::ostream& out) {
  const auto spec = merge_spec_from_json(read_file(o.spec));
  std::vector<Checkpoint> models;
  for (const auto& p : o.inputs) models.push_back(load_checkpoint(p));
  std::optional<Checkpoint> base;
  if (!o.base.empty()) base = load_checkpoint(o.base);
  const auto merged = merge(spec, base ? &*base : nullptr, models);
  save_checkpoint(o.output, merged);
  if (g.json) {
    nlohmann::json j{{"method", method_name(spec.method)},
                     {"seed", spec.seed.value},
                     {"output", o.output},
                     {"tensors", nlohmann::json::array()}};
    for (const auto& [name, t] : merged) j["tensors"].push_back({{"name", name}, {"count", t.size()}});
    emit_json(out, j);
  } else {
    for (const auto& [name, t] : merged) {
      out << name << "\t" << t.size() << "\t" << method_name(spec.method) << "\tseed "
          << spec.seed.value << "\n";
    }
    out << "merged " << merged.size() << " tensors (" << element_count(merged)
        << " values) from " << models.size() << " models -> " << o.output << "\n";
  }
  return 0;
}

// ---- pareto / curriculum ----------------------------------------------

std::vector<CandidatePoint> load_candidates(const std::string& path) {
  auto in = open_input(path);
  return read_candidates_jsonl(in);
}

void print_candidates(const std::vector<CandidatePoint>& cands, bool json, std::ostream& out) {
  if (json) {
    nlohmann::json j{{"candidates", nlohmann::json::array()}};
    for (const auto& c : cands) {
      j["candidates"].push_back({{"id", c.id},
                                 {"quality", c.quality},
                                 {"ttft_ms", c.ttft_ms},
                                 {"decode_ms_p50", c.decode_ms_p50},
                                 {"decode_ms_p95", c.decode_ms_p95},
                                 {"peak_mem_bytes", c.peak_mem_bytes}});
    }
    emit_json(out, j);
    return;
  }
  for (const auto& c : cands) {
    out << c.id << "\tquality " << fmt(c.quality) << "\tdecode_p50 " << fmt(c.decode_ms_p50)
        << " ms\tpeak_mem " << fmt(c.peak_mem_bytes) << " B\n";
  }
}

Objective parse_reference(const std::string& text) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  double q = 0, lat = 0, mem = 0;
  if (!(in >> q >> lat >> mem)) {
    throw InputError("reference must be quality,decode_ms,peak_mem_bytes");
  }
  return {q, -lat, -mem};
}

// ---- retrieve ---------------------------------------------------------

struct RetrieveOptions {
  std::string docs;
  std::string index;
  std::string output;
  std::string projection;
  std::size_t proj_dim = 128;
  std::string query_text;
  std::string query_ids;
  std::size_t top = 10;
};

std::vector<TokenId> tokens_from_json(const nlohmann::json& j) {
  if (j.contains("tokens")) return j.at("tokens").get<std::vector<TokenId>>();
  return byte_tokenize(j.at("text").get<std::string>());
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"lfm-forge: hybrid conv/attention backbone toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Model config JSON file or preset name")
      ->capture_default_str();
  app.add_option("--checkpoint", g.checkpoint, "LFT1 checkpoint (default: seeded weights)");
  app.add_option("--seed", g.seed, "Seed for weights, prompts and merges")->capture_default_str();
  app.add_flag("--json", g.json, "Emit JSON results");
  app.add_option("--repeats", g.repeats, "Timed benchmark repeats")->capture_default_str();
  app.add_flag("--check-grad", g.check_grad, "Finite-difference gradient check");

  auto* presets = app.add_subcommand("presets", "List built-in model configs");
  auto* show = app.add_subcommand("show-config", "Print the resolved model config");

  std::string init_output;
  auto* init = app.add_subcommand("init", "Write seeded weights for a config");
  init->add_option("-o,--output", init_output, "Checkpoint path")->required();

  BenchOptions bench_opts;
  std::string bench_contexts = "1024,4096";
  bool bench_runs = false;
  auto* bench = app.add_subcommand("bench", "Prefill and decode throughput at batch 1");
  bench->add_option("--contexts", bench_contexts, "Prefix lengths")->capture_default_str();
  bench->add_option("--decode", bench_opts.n_decode, "Tokens generated per run")
      ->capture_default_str();
  bench->add_option("--warmup", bench_opts.warmup, "Untimed runs per context")
      ->capture_default_str();
  bench->add_flag("--runs", bench_runs, "Include every timed run");

  std::string gen_prompt, gen_text;
  std::size_t gen_tokens = 16;
  auto* generate = app.add_subcommand("generate", "Greedy decoding");
  auto* prompt_opt = generate->add_option("--prompt", gen_prompt, "Prompt token ids");
  auto* text_opt = generate->add_option("--text", gen_text, "Prompt text (byte tokens)");
  prompt_opt->excludes(text_opt);
  generate->add_option("-n,--tokens", gen_tokens, "Tokens to generate")->capture_default_str();
  generate->add_flag("--greedy", "Greedy argmax decoding (the only mode)");

  MergeOptions merge_opts;
  auto* merge_cmd = app.add_subcommand("merge", "Merge checkpoints");
  merge_cmd->add_option("spec", merge_opts.spec, "Merge spec JSON")->required();
  merge_cmd->add_option("inputs", merge_opts.inputs, "Fine-tuned checkpoints")->required();
  merge_cmd->add_option("--base", merge_opts.base, "Base checkpoint");
  merge_cmd->add_option("-o,--output", merge_opts.output, "Output checkpoint")->required();

  LossOptions loss_opts;
  auto* loss = app.add_subcommand("loss", "Evaluate a training loss on a fixture");
  loss->add_option("kind", loss_opts.kind, "dtk, align or retrieval")
      ->required()
      ->check(CLI::IsMember({"dtk", "align", "retrieval"}));
  loss->add_option("data", loss_opts.data, "JSONL fixture")->required();
  loss->add_option("--tau", loss_opts.tau, "Distillation temperature")->capture_default_str();
  loss->add_option("--k", loss_opts.k, "Top-K size for full teacher logits")
      ->capture_default_str();
  loss->add_option("--variant", loss_opts.variant, "forward, reverse_lb or reverse_tw")
      ->capture_default_str();
  loss->add_option("--preset", loss_opts.preset, "dpo_ln, apo_zero_ln or joint")
      ->capture_default_str();

  auto* pareto = app.add_subcommand("pareto", "Budget filtering, Pareto front, HVI ranking");
  pareto->require_subcommand(1);
  std::string pf_cands, pf_budget, ph_front, ph_pool, ph_reference;
  auto* pfilter = pareto->add_subcommand("filter", "Drop candidates over budget");
  pfilter->add_option("candidates", pf_cands, "Candidates JSONL")->required();
  pfilter->add_option("--budget", pf_budget, "Budget JSON")->required();
  auto* pfront = pareto->add_subcommand("front", "Non-dominated candidates");
  pfront->add_option("candidates", pf_cands, "Candidates JSONL")->required();
  auto* phvi = pareto->add_subcommand("hvi", "Rank a pool by hypervolume improvement");
  phvi->add_option("front", ph_front, "Current front JSONL")->required();
  phvi->add_option("pool", ph_pool, "Candidate pool JSONL")->required();
  phvi->add_option("--reference", ph_reference, "quality,decode_ms,peak_mem_bytes");

  std::string curriculum_path;
  auto* curriculum = app.add_subcommand("curriculum", "Order items by ensemble success rate");
  curriculum->add_option("matrix", curriculum_path, "JSONL rows of 0/1 outcomes")->required();

  RetrieveOptions ret;
  auto* retrieve = app.add_subcommand("retrieve", "Late-interaction encoding and scoring");
  retrieve->require_subcommand(1);
  auto* encode_cmd = retrieve->add_subcommand("encode", "Encode documents into an index");
  encode_cmd->add_option("docs", ret.docs, "JSONL with id and text or tokens")->required();
  encode_cmd->add_option("-o,--output", ret.output, "Index path (LFT1)")->required();
  auto* score_cmd = retrieve->add_subcommand("score", "Score a query against an index");
  score_cmd->add_option("index", ret.index, "Index path (LFT1)")->required();
  auto* qt = score_cmd->add_option("--query-text", ret.query_text, "Query text");
  auto* qi = score_cmd->add_option("--query", ret.query_ids, "Query token ids");
  qt->excludes(qi);
  score_cmd->add_option("--top", ret.top, "Hits to print")->capture_default_str();
  for (auto* sub : {encode_cmd, score_cmd}) {
    sub->add_option("--projection", ret.projection, "Projection LFT1 [d_model, dim]");
    sub->add_option("--proj-dim", ret.proj_dim, "Seeded projection width")
        ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (presets->parsed()) {
      if (g.json) {
        emit_json(out, {{"presets", preset_names()}});
      } else {
        for (const auto& n : preset_names()) out << n << "\n";
      }
      return 0;
    }
    const auto config = [&] { return resolve_config(g.config); };
    if (show->parsed()) {
      out << config_to_json(config()).dump(2) << "\n";
      return 0;
    }
    if (init->parsed()) {
      const Model model = build_model(config(), g.rng());
      save_checkpoint(init_output, model.params());
      if (g.json) {
        emit_json(out, {{"output", init_output},
                        {"tensors", model.params().size()},
                        {"parameters", element_count(model.params())}});
      } else {
        out << "wrote " << model.params().size() << " tensors ("
            << element_count(model.params()) << " parameters) to " << init_output << "\n";
      }
      return 0;
    }
    if (bench->parsed()) {
      const Model model = load_model(config(), g.checkpoint_path(), g.rng());
      bench_opts.contexts = parse_size_list(bench_contexts);
      bench_opts.repeats = g.repeats;
      bench_opts.seed = g.rng();
      const auto report = run_bench(model, bench_opts);
      if (g.json) {
        out << bench_to_json(report, bench_runs).dump(2) << "\n";
      } else {
        print_bench_table(report, out, bench_runs);
      }
      return 0;
    }
    if (generate->parsed()) {
      const Model model = load_model(config(), g.checkpoint_path(), g.rng());
      const auto prompt = text_opt->count() ? byte_tokenize(gen_text) : parse_token_list(gen_prompt);
      if (prompt.empty()) throw InputError("generate: empty prompt (use --prompt or --text)");
      const auto ids = generate_greedy(model, prompt, gen_tokens);
      if (g.json) {
        emit_json(out, {{"prompt", prompt}, {"tokens", ids}});
      } else {
        for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
        out << "\n";
      }
      return 0;
    }
    if (merge_cmd->parsed()) return cmd_merge(g, merge_opts, out);
    if (loss->parsed()) {
      if (loss_opts.kind == "dtk") return cmd_loss_dtk(g, loss_opts, out);
      if (loss_opts.kind == "align") return cmd_loss_align(g, loss_opts, out);
      return cmd_loss_retrieval(g, loss_opts, out);
    }
    if (pfilter->parsed()) {
      const auto budget = budget_from_json(read_file(pf_budget));
      print_candidates(filter_budgets(load_candidates(pf_cands), budget), g.json, out);
      return 0;
    }
    if (pfront->parsed()) {
      print_candidates(pareto_front(load_candidates(pf_cands)), g.json, out);
      return 0;
    }
    if (phvi->parsed()) {
      const auto front = load_candidates(ph_front);
      const auto pool = load_candidates(ph_pool);
      Objective ref;
      if (!ph_reference.empty()) {
        ref = parse_reference(ph_reference);
      } else {
        std::vector<Objective> all;
        for (const auto& c : front) all.push_back(to_objective(c));
        for (const auto& c : pool) all.push_back(to_objective(c));
        ref = default_reference(all);
      }
      const auto ranked = rank_by_hvi(front, pool, ref);
      if (g.json) {
        nlohmann::json j{{"reference", {ref[0], -ref[1], -ref[2]}},
                         {"ranking", nlohmann::json::array()}};
        for (const auto& e : ranked) j["ranking"].push_back({{"id", e.id}, {"hvi", e.hvi}});
        emit_json(out, j);
      } else {
        for (std::size_t i = 0; i < ranked.size(); ++i) {
          out << i + 1 << "\t" << ranked[i].id << "\thvi " << fmt(ranked[i].hvi) << "\n";
        }
      }
      return 0;
    }
    if (curriculum->parsed()) {
      auto in = open_input(curriculum_path);
      const auto res = curriculum_order(read_curriculum_jsonl(in));
      if (g.json) {
        emit_json(out, {{"success_rate", res.success_rate}, {"order", res.order}});
      } else {
        for (std::size_t r = 0; r < res.order.size(); ++r) {
          out << r + 1 << "\titem " << res.order[r] << "\tp " << fmt(res.success_rate[res.order[r]])
              << "\n";
        }
      }
      return 0;
    }
    if (encode_cmd->parsed() || score_cmd->parsed()) {
      const Model model = load_model(config(), g.checkpoint_path(), g.rng());
      const auto proj_path =
          ret.projection.empty() ? std::nullopt : std::optional<std::string>(ret.projection);
      const Tensor projection = load_projection(model, proj_path, ret.proj_dim, g.rng());
      if (encode_cmd->parsed()) {
        auto in = open_input(ret.docs);
        DocumentIndex index;
        std::string line;
        std::size_t line_no = 0;
        nlohmann::json report{{"documents", nlohmann::json::array()}};
        while (std::getline(in, line)) {
          ++line_no;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("id").get<std::string>();
            auto emb = encode(model, projection, tokens_from_json(j), Role::document);
            report["documents"].push_back(
                {{"id", id}, {"tokens", emb.n_tokens()}, {"truncated", emb.truncated}});
            if (!g.json) {
              out << id << "\t" << emb.n_tokens() << " tokens"
                  << (emb.truncated ? " (truncated)" : "") << "\n";
            }
            index.add(id, std::move(emb));
          } catch (const nlohmann::json::exception& e) {
            throw InputError("line " + std::to_string(line_no) + ": " + e.what());
          }
        }
        index.save(ret.output);
        if (g.json) {
          report["output"] = ret.output;
          emit_json(out, report);
        } else {
          out << "indexed " << index.size() << " documents -> " << ret.output << "\n";
        }
        return 0;
      }
      const auto index = DocumentIndex::load(ret.index);
      const auto q_tokens =
          qt->count() ? byte_tokenize(ret.query_text) : parse_token_list(ret.query_ids);
      const auto query = encode(model, projection, q_tokens, Role::query);
      const auto hits = index.search(query, ret.top);
      if (g.json) {
        nlohmann::json j{{"query_tokens", query.n_tokens()},
                         {"truncated", query.truncated},
                         {"hits", nlohmann::json::array()}};
        for (const auto& h : hits) j["hits"].push_back({{"id", h.id}, {"score", h.score}});
        emit_json(out, j);
      } else {
        if (query.truncated) err << "note: query truncated to " << query.n_tokens() << " tokens\n";
        for (std::size_t i = 0; i < hits.size(); ++i) {
          out << i + 1 << "\t" << hits[i].id << "\t" << fmt(hits[i].score, "%.6f") << "\n";
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "error: no command given\n";
  return 1;
}

}  // namespace lfm::cli
