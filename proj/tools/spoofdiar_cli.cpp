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

// spoofdiar command line: generate | train | evaluate | score | ablate | dump-embeddings

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "spoofdiar/binary_io.hpp"
#include "spoofdiar/checkpoint.hpp"
#include "spoofdiar/config.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/experiment.hpp"

namespace fs = std::filesystem;
using namespace spoofdiar;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string partition = "dev";
  std::optional<double> threshold;
  bool oracle_k = false;
  std::optional<int> k;
  std::string corpus;
  std::string checkpoint;
  bool dump = false;
  std::string ref, hyp, mask;
};

void apply_inference_flags(ExperimentConfig& c, const CommonFlags& f) {
  if (f.threshold) c.inference.threshold = *f.threshold;
  if (f.k) {
    c.inference.k_override = *f.k;
    c.inference.oracle_k = false;
  }
  if (f.oracle_k) {
    c.inference.k_override.reset();
    c.inference.oracle_k = true;
  }
  if (!f.corpus.empty()) c.corpus_dir = f.corpus;
  c.inference.validate();
}

void print_report(const DiarizationReport& r, const std::string& partition) {
  std::cout << partition << ": JI_bona " << 100.0 * r.ji_bona << " %  JER_spoof "
            << 100.0 * r.jer_spoof << " %";
  if (r.eer_utt) std::cout << "  EER(utt) " << 100.0 * *r.eer_utt << " %";
  if (r.eer_frame) std::cout << "  EER(frame) " << 100.0 * *r.eer_frame << " %";
  std::cout << "  (" << r.n_utts << " utts, " << r.n_attacks << " attacks)\n";
}

/// Config stored in a checkpoint, with a consistency check against --config.
ExperimentConfig checkpoint_config(const Checkpoint& ck, const CommonFlags& f) {
  ExperimentConfig c = parse_experiment_config(ck.config_ini);
  if (!f.config.empty()) {
    ExperimentConfig user = load_experiment_config(f.config);
    ExperimentConfig a = c, b = user;
    // Only the network definition has to agree; inference settings may differ.
    a.inference = b.inference;
    a.utt_pooling = b.utt_pooling;
    a.train = b.train;
    a.seeds = b.seeds;
    a.out_dir = b.out_dir;
    a.name = b.name;
    a.corpus_dir = b.corpus_dir;
    if (to_ini(a) != to_ini(b)) {
      throw ConfigError("--config does not match the configuration stored in the checkpoint");
    }
    c.inference = user.inference;
    c.utt_pooling = user.utt_pooling;
    c.corpus_dir = user.corpus_dir;
  }
  check_compatible(ck.params, c.model);
  return c;
}

int cmd_generate(const CommonFlags& f) {
  CorpusSpec spec;
  if (!f.config.empty()) spec = load_experiment_config(f.config).corpus;
  if (f.seed) spec.seed = *f.seed;
  spec.validate();
  const fs::path out = f.out.empty() ? fs::path("corpus") : fs::path(f.out);
  const auto checksum = write_corpus(generate_corpus(spec), out);
  std::cout << "corpus written to " << out.string() << "\n"
            << "sha256 " << checksum << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f) {
  ExperimentConfig c = load_experiment_config(f.config);
  apply_inference_flags(c, f);
  const std::uint64_t seed = f.seed ? *f.seed : c.seeds.front();
  const fs::path out = f.out.empty() ? fs::path(c.out_dir) / c.name / ("seed_" + std::to_string(seed))
                                     : fs::path(f.out);
  const Corpus corpus = obtain_corpus(c);
  try {
    const auto s = run_experiment(c, corpus, seed, out, &std::cerr);
    std::cout << "best epoch " << s.best_epoch << ", checkpoint " << (out / "best.ckpt").string() << "\n";
    print_report(s.dev, "dev");
    print_report(s.eval, "eval");
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\nlast good checkpoint: "
              << (out / "best.ckpt").string() << "\n";
    return 3;
  }
  return 0;
}

int cmd_evaluate(const CommonFlags& f) {
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  ExperimentConfig c = checkpoint_config(ck, f);
  apply_inference_flags(c, f);
  const Corpus corpus = obtain_corpus(c);
  const auto& utts = corpus.partition(parse_partition(f.partition));
  const auto r = evaluate_partition(ck.params, c, utts, f.partition);
  const fs::path out = f.out.empty() ? fs::path(f.checkpoint).parent_path() : fs::path(f.out);
  write_hypotheses(out, f.partition, r.hyps, c.corpus.resolution);
  const std::uint64_t seed = c.seeds.empty() ? 0 : c.seeds.front();
  io::write_text_file(out / (f.partition + ".report.json"), report_json(r.report, f.partition, c, seed));
  if (f.dump) dump_embeddings(out / (f.partition + ".embeddings.tsv"), ck.params, c, utts, r.hyps);
  print_report(r.report, f.partition);
  return 0;
}

int cmd_score_files(const CommonFlags& f) {
  std::optional<std::string> mask;
  if (!f.mask.empty()) mask = io::read_text_file(f.mask);
  ExperimentConfig c;
  if (!f.config.empty()) c = load_experiment_config(f.config);
  const auto report = score_label_files(io::read_text_file(f.ref), io::read_text_file(f.hyp),
                                        mask ? std::optional<std::string_view>(*mask) : std::nullopt,
                                        c.corpus.resolution);
  print_report(report, "score");
  if (!f.out.empty()) {
    io::write_text_file(fs::path(f.out) / "score.report.json", report_json(report, "score", c, c.seeds.front()));
  }
  return 0;
}

int cmd_score(const CommonFlags& f, const std::string& hyp_dir) {
  if (!f.ref.empty()) return cmd_score_files(f);
  if (hyp_dir.empty()) throw ConfigError("score needs --hyp-dir or --ref/--hyp");
  ExperimentConfig c;
  if (!f.config.empty()) c = load_experiment_config(f.config);
  apply_inference_flags(c, f);
  const Corpus corpus = obtain_corpus(c);
  const auto& utts = corpus.partition(parse_partition(f.partition));
  const auto hyps = read_hypotheses(hyp_dir, f.partition, corpus.spec.resolution);
  const auto report = score_hypotheses(utts, hyps, c.utt_pooling);
  int violations = 0;
  for (const auto& h : hyps) violations += lcm_violations(h, c.inference.threshold);
  print_report(report, f.partition);
  std::cout << "LCM violations at threshold " << c.inference.threshold << ": " << violations << "\n";
  if (!f.out.empty()) {
    io::write_text_file(fs::path(f.out) / (f.partition + ".rescored.json"),
                        report_json(report, f.partition, c, c.seeds.front()));
  }
  return violations == 0 ? 0 : 4;
}

int cmd_ablate(const CommonFlags& f) {
  AblationGrid grid = load_grid(f.config);
  if (f.seed) grid.base.seeds = {*f.seed};
  const fs::path out = f.out.empty() ? fs::path(grid.base.out_dir) / grid.name : fs::path(f.out);
  const auto table = run_ablation(grid, out, &std::cerr);
  std::cout << table_text(table);
  return 0;
}

int cmd_dump(const CommonFlags& f) {
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  ExperimentConfig c = checkpoint_config(ck, f);
  apply_inference_flags(c, f);
  const Corpus corpus = obtain_corpus(c);
  const auto& utts = corpus.partition(parse_partition(f.partition));
  const auto r = evaluate_partition(ck.params, c, utts, f.partition);
  const fs::path out = f.out.empty() ? fs::path(f.partition + ".embeddings.tsv") : fs::path(f.out);
  dump_embeddings(out, ck.params, c, utts, r.hyps);
  std::cout << "embeddings written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spoofdiar: spoof diarization with attractor tokens on synthetic features"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string hyp_dir;

  auto add_infer = [&](CLI::App* sub) {
    sub->add_option("--threshold", f.threshold, "bona score threshold");
    auto* ok = sub->add_flag("--oracle-k", f.oracle_k, "use the reference number of attacks as k");
    sub->add_option("--k", f.k, "fixed cluster count")->excludes(ok);
    sub->add_option("--corpus", f.corpus, "corpus directory (overrides experiment.corpus_dir)");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  gen->add_option("--config", f.config, "INI file with a [corpus] section");
  gen->add_option("--seed", f.seed, "corpus seed");
  gen->add_option("--out", f.out, "output directory");

  auto* train = app.add_subcommand("train", "train one model and evaluate it");
  train->add_option("--config", f.config, "experiment INI")->required();
  train->add_option("--seed", f.seed, "training seed (default: first of experiment.seeds)");
  train->add_option("--out", f.out, "run directory");
  add_infer(train);

  auto* eval = app.add_subcommand("evaluate", "diarize a partition with a checkpoint");
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required();
  eval->add_option("--config", f.config, "experiment INI to check against the checkpoint");
  eval->add_option("--partition", f.partition, "train, dev or eval");
  eval->add_option("--out", f.out, "output directory (default: checkpoint directory)");
  eval->add_flag("--dump-embeddings", f.dump, "also write <partition>.embeddings.tsv");
  add_infer(eval);

  auto* score = app.add_subcommand("score", "score hypothesis files against references");
  auto* hd = score->add_option("--hyp-dir", hyp_dir, "directory with <partition>.hyp and .scores.tsv");
  auto* rf = score->add_option("--ref", f.ref, "reference label file (instead of --hyp-dir)")->excludes(hd);
  score->add_option("--hyp", f.hyp, "hypothesis label file")->needs(rf);
  score->add_option("--mask", f.mask, "speech mask label file")->needs(rf);
  rf->needs(score->get_option("--hyp"));
  score->add_option("--config", f.config, "experiment INI (corpus and inference settings)");
  score->add_option("--partition", f.partition, "train, dev or eval");
  score->add_option("--out", f.out, "write <partition>.rescored.json here");
  add_infer(score);

  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->add_option("--config", f.config, "grid INI")->required();
  ablate->add_option("--seed", f.seed, "run a single seed instead of the grid's list");
  ablate->add_option("--out", f.out, "output directory");

  auto* dump = app.add_subcommand("dump-embeddings", "write E' with labels and clusters");
  dump->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required();
  dump->add_option("--config", f.config, "experiment INI to check against the checkpoint");
  dump->add_option("--partition", f.partition, "train, dev or eval");
  dump->add_option("--out", f.out, "output TSV");
  add_infer(dump);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(f);
    if (*train) return cmd_train(f);
    if (*eval) return cmd_evaluate(f);
    if (*score) return cmd_score(f, hyp_dir);
    if (*ablate) return cmd_ablate(f);
    if (*dump) return cmd_dump(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
