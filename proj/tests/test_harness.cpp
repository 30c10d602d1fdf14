// Copyright 2026 The spoofdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spoofdiar/checkpoint.hpp"
#include "spoofdiar/config.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/experiment.hpp"

using namespace spoofdiar;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(int epochs) {
  auto c = parse_experiment_config(R"(
[corpus]
n_train = 10
n_dev = 4
n_eval = 4
d_feat = 8
min_frames = 16
max_frames = 24
min_segment = 4
max_segment = 8
class_separation = 3
noise_std = 0.3
[model]
d = 8
n_heads = 2
d_ff = 16
gmlp_d_ffn = 16
max_len = 64
[train]
batch_size = 4
learning_rate = 0.01
)");
  c.train.epochs = epochs;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spoofdiar_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("one-epoch smoke run writes a loadable checkpoint") {
  const auto config = tiny_config(1);
  const auto corpus = obtain_corpus(config);
  const auto dir = scratch("smoke");
  const auto summary = run_experiment(config, corpus, 1, dir, nullptr);
  for (const char* f : {"config.ini", "train_log.tsv", "epochs.tsv", "best.ckpt", "dev.hyp",
                        "eval.hyp", "dev.scores.tsv", "eval.report.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  const auto ck = load_checkpoint(dir / "best.ckpt");
  const auto echoed = parse_experiment_config(ck.config_ini);
  CHECK_NOTHROW(check_compatible(ck.params, echoed.model));
  CHECK(summary.eval.n_utts == 4);

  // The saved parameters reproduce the reported numbers.
  const auto again = evaluate_partition(ck.params, echoed, corpus.eval, "eval");
  CHECK(again.report.jer_spoof == summary.eval.jer_spoof);
  CHECK(again.report.ji_bona == summary.eval.ji_bona);

  auto other = config;
  other.model.d = 16;
  CHECK_THROWS_AS(check_compatible(ck.params, other.model), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto config = tiny_config(6);
  const auto corpus = obtain_corpus(config);
  const auto a = train_model(config.model, config.train, config.inference, corpus, 3);
  const auto b = train_model(config.model, config.train, config.inference, corpus, 3);
  REQUIRE(a.epochs.size() == 6);
  CHECK(a.epochs.back().train.total < a.epochs.front().train.total);
  CHECK(a.epochs.back().dev.total < a.epochs.front().dev.total);
  CHECK(a.best_epoch == b.best_epoch);
  for (std::size_t i = 0; i < a.best.size(); ++i) {
    CHECK(a.best.tensors()[i].value == b.best.tensors()[i].value);
  }
}

TEST_CASE("scoring the reference against itself is perfect") {
  const auto config = tiny_config(1);
  const auto corpus = obtain_corpus(config);
  std::vector<DiarizationHypothesis> hyps;
  for (const auto& u : corpus.dev) {
    DiarizationHypothesis h{u.utt_id, u.frame_labels.labels, {}};
    for (int c : h.frame_assignments) h.bona_scores.push_back(c == 0 ? 1.0 : 0.0);
    hyps.push_back(h);
  }
  const auto r = score_hypotheses(corpus.dev, hyps, UttPooling::min);
  CHECK(r.ji_bona == 0.0);
  CHECK(r.jer_spoof == 0.0);
}

TEST_CASE("hypothesis files rescore to the in-memory report") {
  const auto config = tiny_config(2);
  const auto corpus = obtain_corpus(config);
  const auto dir = scratch("rescore");
  const auto summary = run_experiment(config, corpus, 2, dir, nullptr);
  const auto hyps = read_hypotheses(dir, "dev", config.corpus.resolution);
  REQUIRE(hyps.size() == corpus.dev.size());
  for (const auto& h : hyps) CHECK(lcm_violations(h, config.inference.threshold) == 0);
  const auto r = score_hypotheses(corpus.dev, hyps, config.utt_pooling);
  CHECK(r.ji_bona == summary.dev.ji_bona);
  CHECK(r.jer_spoof == summary.dev.jer_spoof);
  fs::remove_all(dir);
}

TEST_CASE("embedding dump has one row per frame") {
  const auto config = tiny_config(1);
  const auto corpus = obtain_corpus(config);
  ModelParams params = init_model(config.model, 1);
  const auto ev = evaluate_partition(params, config, corpus.dev, "dev");
  const auto dir = scratch("emb");
  dump_embeddings(dir / "emb.tsv", params, config, corpus.dev, ev.hyps);
  std::ifstream is(dir / "emb.tsv");
  std::string line;
  std::getline(is, line);
  const auto columns = [](const std::string& s) { return std::count(s.begin(), s.end(), '\t') + 1; };
  // utt_id, frame, 2d embedding columns, label, cluster
  CHECK(columns(line) == 2 + 2 * config.model.d + 2);
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(columns(line) == 2 + 2 * config.model.d + 2);
    ++rows;
  }
  int frames = 0;
  for (const auto& u : corpus.dev) frames += u.num_frames();
  CHECK(rows == frames);
  fs::remove_all(dir);
}

TEST_CASE("ablation tables summarize seeds") {
  const Stat s = summarize({1.0, 2.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.spread == doctest::Approx(1.0));
  CHECK(summarize({4.0}).spread == 0.0);

  AblationGrid grid;
  grid.name = "g";
  grid.base = tiny_config(1);
  grid.base.seeds = {1, 2};
  grid.cells = {{"a", {}}, {"b", {{"model", "attractor_tokens", "false"}}}};
  const auto table = run_ablation(grid, std::nullopt, nullptr);
  REQUIRE(table.cells.size() == 2);
  CHECK(table.cell("b").seeds.size() == 2);
  CHECK(table.cell("a").eval_jer_spoof.n == 2);
  const std::string text = table_text(table);
  CHECK(text.find("+-") != std::string::npos);
  CHECK_THROWS(table.cell("zzz"));
}

TEST_CASE("label files score directly") {
  const std::string ref = "u1 0.00 0.10 bona\nu1 0.10 0.20 A1\n";
  const std::string hyp = "u1 0.00 0.12 bona\nu1 0.12 0.20 C1\n";
  const auto r = score_label_files(ref, hyp, std::nullopt);
  CHECK(r.ji_bona == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(r.jer_spoof == doctest::Approx(0.2).epsilon(1e-12));

  // Masking the disputed frame makes the hypothesis perfect.
  const std::string mask = "u1 0.00 0.10 speech\nu1 0.10 0.12 nonspeech\nu1 0.12 0.20 speech\n";
  const auto m = score_label_files(ref, hyp, mask);
  CHECK(m.ji_bona == 0.0);
  CHECK(m.jer_spoof == 0.0);

  // A file without bona still maps A1 to a spoof class.
  const auto s = score_label_files("u 0.00 0.04 A1\n", "u 0.00 0.04 C3\n", std::nullopt);
  CHECK(s.jer_spoof == 0.0);
  CHECK_THROWS_AS(score_label_files(ref, "v 0.00 0.20 bona\n", std::nullopt), ValidationError);
}
