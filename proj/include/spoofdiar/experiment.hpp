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

// Train / evaluate / ablate drivers behind the CLI.
//
// Run directory:
//   config.ini           resolved config echo
//   train_log.tsv        epoch, step, loss_loc, loss_dia, loss_token, total
//   epochs.tsv           per-epoch train / dev losses
//   best.ckpt            best-dev checkpoint
//   <part>.hyp           hypothesis label file (bona, C1, C2, ...)
//   <part>.scores.tsv    utt_id, frame, bona score
//   <part>.report.json   metrics + provenance

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spoofdiar/config.hpp"
#include "spoofdiar/inference.hpp"
#include "spoofdiar/metrics.hpp"
#include "spoofdiar/synthetic_corpus.hpp"

namespace spoofdiar {

inline constexpr const char* kVersion = "0.1.0";

/// Reads corpus_dir when set, otherwise generates from the [corpus] spec.
Corpus obtain_corpus(const ExperimentConfig& config);

struct EvalResult {
  std::string partition;
  DiarizationReport report;
  std::vector<DiarizationHypothesis> hyps;
};

EvalResult evaluate_partition(const ModelParams& params, const ExperimentConfig& config,
                              const std::vector<FeatUtterance>& utts, const std::string& partition);

/// Fills eer_frame / eer_utt when both classes are present.
void add_eer(DiarizationReport& report, const std::vector<FeatUtterance>& utts,
             const std::vector<DiarizationHypothesis>& hyps, UttPooling pooling);

std::string report_json(const DiarizationReport& report, const std::string& partition,
                        const ExperimentConfig& config, std::uint64_t seed);

void write_hypotheses(const std::filesystem::path& dir, const std::string& partition,
                      const std::vector<DiarizationHypothesis>& hyps, double resolution);
/// Reads <part>.hyp and <part>.scores.tsv back into hypotheses (by utt_id).
std::vector<DiarizationHypothesis> read_hypotheses(const std::filesystem::path& dir,
                                                   const std::string& partition,
                                                   double resolution);

/// Scores hypotheses against the references of `utts` (matched by utt_id).
DiarizationReport score_hypotheses(const std::vector<FeatUtterance>& utts,
                                   const std::vector<DiarizationHypothesis>& hyps,
                                   UttPooling pooling);

/// Scores label-file text directly: reference labels {bona, A1, ...},
/// hypothesis labels {bona, C1, ...}, optional {speech, nonspeech} mask.
DiarizationReport score_label_files(std::string_view reference, std::string_view hypothesis,
                                    std::optional<std::string_view> mask,
                                    double resolution = kDefaultResolution);

/// Frames whose bona score is >= threshold but carry a cluster id.
int lcm_violations(const DiarizationHypothesis& hyp, double threshold);

/// TSV: utt_id, frame, e_0..e_{D-1}, true_label, cluster.
void dump_embeddings(const std::filesystem::path& path, const ModelParams& params,
                     const ExperimentConfig& config, const std::vector<FeatUtterance>& utts,
                     const std::vector<DiarizationHypothesis>& hyps);

struct RunSummary {
  std::uint64_t seed = 0;
  int best_epoch = 0;
  DiarizationReport dev;
  DiarizationReport eval;
};

/// Trains with `seed`, keeps the best-dev parameters, evaluates dev and eval.
/// With `out_dir` every artifact in the run directory layout is written.
/// On divergence the last good checkpoint is kept and DivergenceError rethrown.
RunSummary run_experiment(const ExperimentConfig& config, const Corpus& corpus, std::uint64_t seed,
                          const std::optional<std::filesystem::path>& out_dir, std::ostream* log,
                          ModelParams* trained = nullptr);

struct CellSeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double eval_ji_bona = 0.0;
  double eval_jer_spoof = 0.0;
  double dev_ji_bona = 0.0;
  double dev_jer_spoof = 0.0;
  std::optional<double> eval_eer_utt;
  int best_epoch = 0;
};

struct Stat {
  double mean = 0.0;
  double spread = 0.0;  // sample standard deviation, 0 for one value
  int n = 0;
};

Stat summarize(const std::vector<double>& values);

struct CellResult {
  std::string name;
  std::vector<Setting> overrides;
  std::vector<CellSeedResult> seeds;
  Stat eval_ji_bona;
  Stat eval_jer_spoof;
  Stat dev_ji_bona;
  Stat dev_jer_spoof;
};

struct AblationTable {
  std::string name;
  std::vector<CellResult> cells;

  const CellResult& cell(std::string_view name) const;
};

/// Trains and evaluates every cell for every seed. Cell failures are recorded
/// and the grid continues. With `out_dir` each run writes to
/// out_dir/<cell>/seed_<n>.
AblationTable run_ablation(const AblationGrid& grid,
                           const std::optional<std::filesystem::path>& out_dir, std::ostream* log);

std::string table_json(const AblationTable& table);
/// Plain text table, one row per cell, values in percent.
std::string table_text(const AblationTable& table);

}  // namespace spoofdiar
