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

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli/bench.hpp"
#include "cli/cli.hpp"
#include "doctest.h"
#include "lfm/backbone.hpp"
#include "lfm/checkpoint.hpp"
#include "lfm/config.hpp"

using namespace lfm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lfm-forge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("lfm_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& contents = "") const {
    const auto p = path_ / name;
    if (!contents.empty()) std::ofstream(p) << contents;
    return p.string();
  }

 private:
  fs::path path_;
};

Checkpoint vec(std::vector<float> v) {
  Checkpoint c;
  const std::size_t n = v.size();
  c.emplace("w", Tensor({n}, std::move(v)));
  return c;
}

}  // namespace

TEST_CASE("presets and config listing") {
  const auto r = run({"presets"});
  CHECK(r.code == 0);
  CHECK(r.out.find("lfm2-350m") != std::string::npos);
  CHECK(r.out.find("toy") != std::string::npos);
  const auto j = nlohmann::json::parse(run({"--json", "show-config"}).out);
  CHECK(j.at("d_model").get<int>() == 64);
}

TEST_CASE("generate is deterministic and honours zero tokens") {
  const auto a = run({"generate", "--prompt", "1,2,3", "-n", "6", "--greedy"});
  const auto b = run({"generate", "--prompt", "1,2,3", "-n", "6"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream is(a.out);
  std::vector<int> ids{std::istream_iterator<int>(is), std::istream_iterator<int>()};
  CHECK(ids.size() == 6);

  const Model model = build_model(preset_config("toy"), RngSeed{0});
  const std::vector<TokenId> prompt{1, 2, 3};
  const auto want = generate_greedy(model, prompt, 6);
  CHECK(std::equal(ids.begin(), ids.end(), want.begin(), want.end()));

  const auto zero = nlohmann::json::parse(run({"--json", "generate", "--text", "hi", "-n", "0"}).out);
  CHECK(zero.at("tokens").empty());
  CHECK(zero.at("schema_version").get<int>() == 1);
  CHECK(zero.at("prompt") == nlohmann::json::array({104, 105}));
}

TEST_CASE("init writes a checkpoint that loads back") {
  TempDir dir;
  const auto path = dir.file("toy.lft");
  CHECK(run({"--seed", "3", "init", "-o", path}).code == 0);
  const auto ck = load_checkpoint(path);
  const Model ref = build_model(preset_config("toy"), RngSeed{3});
  CHECK(ck.size() == ref.params().size());
  for (const auto& [name, t] : ref.params()) CHECK(bit_identical(ck.at(name), t));
  const auto via_ckpt = run({"--checkpoint", path, "generate", "--prompt", "5", "-n", "4"});
  const auto via_seed = run({"--seed", "3", "generate", "--prompt", "5", "-n", "4"});
  CHECK(via_ckpt.out == via_seed.out);
}

TEST_CASE("merge command identities and the ties example") {
  TempDir dir;
  const auto base = dir.file("base.lft"), a = dir.file("a.lft"), b = dir.file("b.lft");
  save_checkpoint(base, vec({0, 0, 0, 0}));
  save_checkpoint(a, vec({2, -1, 0.5f, 0}));
  save_checkpoint(b, vec({-1.5f, -2, 1, 0.2f}));

  const auto out = dir.file("out.lft");
  const auto soup = dir.file("soup.json", R"({"method":"soup","weights":[0.5,0.5]})");
  REQUIRE(run({"merge", soup, a, a, "-o", out}).code == 0);
  CHECK(bit_identical(load_checkpoint(out).at("w"), load_checkpoint(a).at("w")));

  const auto ties = dir.file("ties.json", R"({"method":"ties","density":0.5})");
  const auto r = run({"merge", ties, a, b, "--base", base, "-o", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ties") != std::string::npos);
  const auto merged = load_checkpoint(out).at("w");
  CHECK(merged[0] == 2.0f);
  CHECK(merged[1] == -1.5f);
  CHECK(merged[2] == 0.0f);
  CHECK(merged[3] == 0.0f);

  const auto ta = dir.file("ta.json", R"({"method":"task_arithmetic","weights":[0.3,0.7]})");
  const auto dare = dir.file("dare.json", R"({"method":"dare_linear","weights":[0.3,0.7],"drop_rate":0,"seed":4})");
  const auto ta_out = dir.file("ta.lft"), dare_out = dir.file("dare.lft");
  REQUIRE(run({"merge", ta, a, b, "--base", base, "-o", ta_out}).code == 0);
  REQUIRE(run({"merge", dare, a, b, "--base", base, "-o", dare_out}).code == 0);
  CHECK(bit_identical(load_checkpoint(ta_out).at("w"), load_checkpoint(dare_out).at("w")));

  const auto missing_base = run({"merge", ta, a, b, "-o", out});
  CHECK(missing_base.code == 1);
  CHECK(missing_base.err.find("error:") == 0);

  const auto other = dir.file("other.lft");
  save_checkpoint(other, vec({1, 2, 3}));
  const auto bad = run({"merge", soup, a, other, "-o", out});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("w") != std::string::npos);
}

TEST_CASE("loss command on distillation fixtures") {
  TempDir dir;
  const auto same = dir.file("same.jsonl",
                             "{\"student_logits\":[0.5,1,-1,2],\"teacher_logits\":[0.5,1,-1,2]}\n"
                             "{\"student_logits\":[1,1,1],\"teacher_logits\":[1,1,1]}\n");
  const auto j = nlohmann::json::parse(run({"--json", "loss", "dtk", same, "--k", "2", "--tau", "1"}).out);
  CHECK(std::abs(j.at("total").get<double>()) <= 1e-6);
  CHECK(j.at("records").get<int>() == 2);

  const auto hand = dir.file(
      "hand.jsonl",
      "{\"student_logits\":[0,0,0,0],\"indices\":[0,1],\"topk_logits\":[-0.916290732,-1.203972804],"
      "\"tail_logsumexp\":-1.203972804}\n");
  const auto h = nlohmann::json::parse(run({"--json", "loss", "dtk", hand, "--tau", "1"}).out);
  CHECK(h.at("total").get<double>() == doctest::Approx(0.08944).epsilon(1e-4));

  const auto g = run({"--check-grad", "loss", "dtk", hand, "--tau", "2", "--variant", "reverse_tw"});
  CHECK(g.code == 0);
  CHECK(g.out.find("grad_check") != std::string::npos);
  CHECK(g.out.find(" ok") != std::string::npos);

  const auto bad = dir.file("bad.jsonl", "{\"student_logits\":[0,0]}\n{oops\n");
  const auto r = run({"loss", "dtk", bad});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 1") != std::string::npos);
  CHECK(run({"loss", "dtk", hand, "--variant", "sideways"}).code == 1);
}

TEST_CASE("loss command on alignment and retrieval fixtures") {
  TempDir dir;
  const auto pref = dir.file(
      "pref.jsonl",
      R"({"prompt_len":3,"len_chosen":4,"len_rejected":5,"logp_policy_chosen":-6,"logp_policy_rejected":-7,"logp_ref_chosen":-6,"logp_ref_rejected":-7})"
      "\n");
  const auto j = nlohmann::json::parse(run({"--json", "loss", "align", pref}).out);
  CHECK(j.at("loss").get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const auto jj = nlohmann::json::parse(run({"--json", "loss", "align", pref, "--preset", "joint"}).out);
  CHECK(jj.at("loss").get<double>() == doctest::Approx(std::log1p(std::exp(0.1))).epsilon(1e-12));
  const auto g = run({"--check-grad", "loss", "align", pref, "--preset", "joint"});
  CHECK(g.code == 0);
  CHECK(g.out.find(" ok") != std::string::npos);

  const auto scored = dir.file("scored.jsonl", "{\"teacher\":[1,0],\"student\":[0,0]}\n");
  const auto s = nlohmann::json::parse(run({"--json", "--check-grad", "loss", "retrieval", scored}).out);
  CHECK(s.at("loss").get<double>() == 0.5);
  CHECK(s.at("grad_max_rel_error").get<double>() <= 1e-4);
}

TEST_CASE("bench reports medians consistent with the per-run dump") {
  const auto r = run({"--json", "--repeats", "5", "bench", "--contexts", "16,32", "--decode", "4",
                      "--warmup", "0", "--runs"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j.at("points").size() == 2);
  for (const auto& p : j.at("points")) {
    REQUIRE(p.at("runs").size() == 5);
    std::vector<double> prefill, decode;
    for (const auto& run_j : p.at("runs")) {
      prefill.push_back(run_j.at("prefill_tok_per_s").get<double>());
      decode.push_back(run_j.at("decode_tok_per_s").get<double>());
    }
    std::sort(prefill.begin(), prefill.end());
    std::sort(decode.begin(), decode.end());
    CHECK(p.at("prefill_tok_per_s").get<double>() == prefill[2]);
    CHECK(p.at("decode_tok_per_s").get<double>() == decode[2]);
  }
  CHECK(cli::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  const auto table = run({"--repeats", "1", "bench", "--contexts", "8", "--decode", "2", "--warmup", "0"});
  CHECK(table.code == 0);
  CHECK(table.out.find("prefill") != std::string::npos);
  const auto over = run({"bench", "--contexts", "600", "--decode", "2"});
  CHECK(over.code == 1);
  CHECK(over.err.find("context") != std::string::npos);
}

TEST_CASE("pareto and curriculum commands") {
  TempDir dir;
  const auto cands = dir.file(
      "cands.jsonl",
      R"({"id":"a","quality":0.9,"ttft_ms":5,"decode_ms_p50":10,"decode_ms_p95":12,"peak_mem_bytes":100})"
      "\n"
      R"({"id":"b","quality":0.8,"ttft_ms":5,"decode_ms_p50":12,"decode_ms_p95":13,"peak_mem_bytes":120})"
      "\n"
      R"({"id":"c","quality":0.95,"ttft_ms":5,"decode_ms_p50":20,"decode_ms_p95":30,"peak_mem_bytes":90})"
      "\n");
  const auto front = nlohmann::json::parse(run({"--json", "pareto", "front", cands}).out);
  REQUIRE(front.at("candidates").size() == 2);
  CHECK(front.at("candidates")[0].at("id") == "a");
  CHECK(front.at("candidates")[1].at("id") == "c");

  const auto budget = dir.file("budget.json", R"({"max_ttft_ms":10,"max_decode_ms":13,"max_peak_mem_bytes":200})");
  const auto filtered = nlohmann::json::parse(run({"--json", "pareto", "filter", cands, "--budget", budget}).out);
  CHECK(filtered.at("candidates").size() == 2);

  const auto pool = dir.file(
      "pool.jsonl",
      R"({"id":"p1","quality":0.1,"ttft_ms":5,"decode_ms_p50":30,"decode_ms_p95":30,"peak_mem_bytes":500})"
      "\n"
      R"({"id":"p2","quality":0.99,"ttft_ms":5,"decode_ms_p50":5,"decode_ms_p95":6,"peak_mem_bytes":50})"
      "\n");
  const auto hvi = nlohmann::json::parse(
      run({"--json", "pareto", "hvi", cands, pool, "--reference", "0,40,600"}).out);
  REQUIRE(hvi.at("ranking").size() == 2);
  CHECK(hvi.at("ranking")[0].at("id") == "p2");
  CHECK(hvi.at("ranking")[1].at("hvi").get<double>() == 0.0);
  CHECK(run({"pareto", "hvi", cands, pool, "--reference", "0.5,40,600"}).code == 1);

  const auto matrix = dir.file("m.jsonl", "[1,1,0]\n[1,1,1]\n[0,0,0]\n");
  const auto cur = run({"curriculum", matrix});
  CHECK(cur.code == 0);
  CHECK(cur.out.find("1\titem 1") != std::string::npos);
  CHECK(cur.out.find("0.666666667") != std::string::npos);
}

TEST_CASE("retrieve encode then score") {
  TempDir dir;
  const auto docs = dir.file("docs.jsonl",
                             "{\"id\":\"cat\",\"text\":\"the cat sat on the mat\"}\n"
                             "{\"id\":\"ids\",\"tokens\":[1,2,3,4,5]}\n");
  const auto index = dir.file("index.lft");
  const auto enc = run({"retrieve", "encode", docs, "-o", index, "--proj-dim", "16"});
  REQUIRE(enc.code == 0);
  CHECK(enc.out.find("indexed 2 documents") != std::string::npos);
  const auto j = nlohmann::json::parse(
      run({"--json", "retrieve", "score", index, "--query-text", "the cat", "--proj-dim", "16", "--top", "2"}).out);
  REQUIRE(j.at("hits").size() == 2);
  for (const auto& h : j.at("hits")) CHECK(h.at("score").get<double>() <= 7.0 + 1e-9);  // query tokens
  const auto again = nlohmann::json::parse(
      run({"--json", "retrieve", "score", index, "--query-text", "the cat", "--proj-dim", "16", "--top", "2"}).out);
  CHECK(again == j);
  CHECK(run({"retrieve", "score", index, "--query-text", "x", "--proj-dim", "8"}).code == 1);
}

TEST_CASE("usage errors exit nonzero with a message") {
  CHECK(run({}).code != 0);
  const auto unknown = run({"frobnicate"});
  CHECK(unknown.code != 0);
  const auto cfg = run({"--config", "no-such-preset", "generate", "--prompt", "1"});
  CHECK(cfg.code == 1);
  CHECK(cfg.err.find("error:") == 0);
  CHECK(run({"generate", "--prompt", "1,999", "-n", "1"}).code == 1);
}
