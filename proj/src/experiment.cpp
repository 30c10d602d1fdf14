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

#include "spoofdiar/experiment.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "spoofdiar/binary_io.hpp"
#include "spoofdiar/checkpoint.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/trainer.hpp"

namespace spoofdiar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

json provenance(const ExperimentConfig& config, std::uint64_t seed) {
  return json{{"tool", "spoofdiar"},
              {"version", kVersion},
              {"eigen", eigen_version()},
              {"experiment", config.name},
              {"seed", seed},
              {"config", to_ini(config)}};
}

}  // namespace

Corpus obtain_corpus(const ExperimentConfig& config) {
  if (!config.corpus_dir.empty()) return read_corpus(config.corpus_dir);
  return generate_corpus(config.corpus);
}

void add_eer(DiarizationReport& report, const std::vector<FeatUtterance>& utts,
             const std::vector<DiarizationHypothesis>& hyps, UttPooling pooling) {
  std::vector<double> fs, us;
  std::vector<int> fl, ul;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& u = utts[i];
    bool has_spoof = false;
    bool has_speech = false;
    for (std::size_t t = 0; t < u.frame_labels.labels.size(); ++t) {
      if (!u.speech_mask.empty() && !u.speech_mask[t]) continue;
      has_speech = true;
      const bool bona = u.frame_labels.labels[t] == 0;
      has_spoof = has_spoof || !bona;
      fs.push_back(hyps[i].bona_scores[t]);
      fl.push_back(bona ? 1 : 0);
    }
    if (!has_speech) continue;
    us.push_back(pool_utterance_score(hyps[i].bona_scores,
                                      u.speech_mask.empty() ? nullptr : &u.speech_mask, pooling));
    ul.push_back(has_spoof ? 0 : 1);
  }
  auto both = [](const std::vector<int>& l) {
    bool p = false, n = false;
    for (int x : l) (x ? p : n) = true;
    return p && n;
  };
  report.eer_frame.reset();
  report.eer_utt.reset();
  if (both(fl)) report.eer_frame = eer(fs, fl);
  if (both(ul)) report.eer_utt = eer(us, ul);
}

DiarizationReport score_hypotheses(const std::vector<FeatUtterance>& utts,
                                   const std::vector<DiarizationHypothesis>& hyps,
                                   UttPooling pooling) {
  std::map<std::string, const DiarizationHypothesis*> by_id;
  for (const auto& h : hyps) by_id[h.utt_id] = &h;
  std::vector<ScoredUtterance> scored;
  std::vector<DiarizationHypothesis> ordered;
  ordered.reserve(utts.size());
  for (const auto& u : utts) {
    auto it = by_id.find(u.utt_id);
    if (it == by_id.end()) throw ValidationError("no hypothesis for '" + u.utt_id + "'");
    ordered.push_back(*it->second);
  }
  for (std::size_t i = 0; i < utts.size(); ++i) {
    scored.push_back({&utts[i].frame_labels, &ordered[i].frame_assignments,
                      utts[i].speech_mask.empty() ? nullptr : &utts[i].speech_mask});
  }
  auto report = score_corpus(scored);
  add_eer(report, utts, ordered, pooling);
  return report;
}

DiarizationReport score_label_files(std::string_view reference, std::string_view hypothesis,
                                    std::optional<std::string_view> mask, double resolution) {
  // Index 0 must be bona even when a file has no bona segment.
  auto label_set = [](std::string_view text) {
    LabelSet s = collect_labels(text);
    if (s.names.empty() || s.names.front() != kBonaLabel) s.names.insert(s.names.begin(), std::string(kBonaLabel));
    return s;
  };
  const auto refs = parse_segments(reference, label_set(reference));
  const auto hyps = parse_segments(hypothesis, label_set(hypothesis));
  std::map<std::string, const Timeline*> hyp_by_id, mask_by_id;
  for (const auto& h : hyps) hyp_by_id[h.utt_id] = &h;
  std::vector<Timeline> masks;
  if (mask) {
    masks = parse_segments(*mask, mask_labels());
    for (const auto& m : masks) mask_by_id[m.utt_id] = &m;
  }

  std::vector<FrameLabels> ref_frames;
  std::vector<std::vector<int>> hyp_frames;
  std::vector<SpeechMask> speech;
  for (const auto& r : refs) {
    const auto h = hyp_by_id.find(r.utt_id);
    if (h == hyp_by_id.end()) throw ValidationError("no hypothesis for '" + r.utt_id + "'");
    ref_frames.push_back(timeline_to_frames(r, resolution));
    hyp_frames.push_back(timeline_to_frames(*h->second, resolution).labels);
    if (mask) {
      const auto m = mask_by_id.find(r.utt_id);
      if (m == mask_by_id.end()) throw ValidationError("no mask for '" + r.utt_id + "'");
      speech.push_back(timeline_to_mask(*m->second, resolution));
    }
  }
  std::vector<ScoredUtterance> scored;
  for (std::size_t i = 0; i < ref_frames.size(); ++i) {
    scored.push_back({&ref_frames[i], &hyp_frames[i], mask ? &speech[i] : nullptr});
  }
  return score_corpus(scored);
}

EvalResult evaluate_partition(const ModelParams& params, const ExperimentConfig& config,
                              const std::vector<FeatUtterance>& utts, const std::string& partition) {
  EvalResult r;
  r.partition = partition;
  r.hyps.reserve(utts.size());
  for (const auto& u : utts) {
    std::optional<int> k;
    if (config.inference.oracle_k) k = reference_spoof_count(u.frame_labels, &u.speech_mask);
    r.hyps.push_back(diarize_utterance(params, config.model, config.inference, u, k));
  }
  r.report = score_hypotheses(utts, r.hyps, config.utt_pooling);
  return r;
}

std::string report_json(const DiarizationReport& report, const std::string& partition,
                        const ExperimentConfig& config, std::uint64_t seed) {
  const auto vocab = config.corpus.vocabulary();
  json utts = json::array();
  for (const auto& u : report.utts) {
    json attacks = json::array();
    for (const auto& a : u.attacks) {
      attacks.push_back({{"attack", vocab.name(a.attack)},
                         {"cluster", a.mapped_cluster < 0 ? json(nullptr) : json("C" + std::to_string(a.mapped_cluster))},
                         {"fa", a.fa},
                         {"md", a.md},
                         {"total", a.total},
                         {"error", a.error()}});
    }
    utts.push_back({{"utt_id", u.utt_id},
                    {"fa_bona", u.fa_bona},
                    {"md_bona", u.md_bona},
                    {"total_bona", u.total_bona},
                    {"ji_bona", u.ji_bona()},
                    {"attacks", attacks}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"partition", partition},
         {"n_utts", report.n_utts},
         {"n_ji_skipped", report.n_ji_skipped},
         {"n_attacks", report.n_attacks},
         {"ji_bona", report.ji_bona},
         {"jer_spoof", report.jer_spoof},
         {"eer_frame", opt(report.eer_frame)},
         {"eer_utt", opt(report.eer_utt)},
         {"utterances", utts},
         {"provenance", provenance(config, seed)}};
  return j.dump(2) + "\n";
}

void write_hypotheses(const fs::path& dir, const std::string& partition,
                      const std::vector<DiarizationHypothesis>& hyps, double resolution) {
  int max_cluster = 0;
  std::vector<Timeline> tl;
  std::ostringstream scores;
  scores << "utt_id\tframe\tscore\n";
  for (const auto& h : hyps) {
    max_cluster = std::max(max_cluster, h.num_clusters());
    tl.push_back(hypothesis_timeline(h, resolution));
    for (std::size_t t = 0; t < h.bona_scores.size(); ++t) {
      scores << h.utt_id << '\t' << t << '\t' << exact(h.bona_scores[t]) << '\n';
    }
  }
  io::write_text_file(dir / (partition + ".hyp"), serialize_segments(tl, hypothesis_label_names(max_cluster)));
  io::write_text_file(dir / (partition + ".scores.tsv"), scores.str());
}

std::vector<DiarizationHypothesis> read_hypotheses(const fs::path& dir, const std::string& partition,
                                                   double resolution) {
  const std::string text = io::read_text_file(dir / (partition + ".hyp"));
  const LabelSet labels = collect_labels(text);
  std::vector<int> cluster_of(labels.names.size());
  for (std::size_t i = 0; i < labels.names.size(); ++i) {
    const auto& n = labels.names[i];
    if (n == kBonaLabel) {
      cluster_of[i] = kBonaAssignment;
    } else if (n.size() > 1 && n[0] == 'C' && n.find_first_not_of("0123456789", 1) == std::string::npos) {
      cluster_of[i] = std::stoi(n.substr(1));
    } else {
      throw VocabularyError("hypothesis label '" + n + "' is neither bona nor C<n>");
    }
  }
  std::vector<DiarizationHypothesis> hyps;
  std::map<std::string, std::size_t> index;
  for (const auto& t : parse_segments(text, labels)) {
    DiarizationHypothesis h;
    h.utt_id = t.utt_id;
    for (int l : timeline_to_frames(t, resolution).labels) {
      h.frame_assignments.push_back(cluster_of[static_cast<std::size_t>(l)]);
    }
    index[h.utt_id] = hyps.size();
    hyps.push_back(std::move(h));
  }
  std::istringstream in(io::read_text_file(dir / (partition + ".scores.tsv")));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream ls(line);
    std::string utt, score;
    std::size_t frame = 0;
    if (!(ls >> utt >> frame >> score)) throw ParseError(lineno, "bad scores row");
    auto it = index.find(utt);
    if (it == index.end()) throw ValidationError("scores for unknown utterance '" + utt + "'");
    auto& h = hyps[it->second];
    if (frame != h.bona_scores.size()) throw ParseError(lineno, "frames out of order for '" + utt + "'");
    h.bona_scores.push_back(std::stod(score));
  }
  for (const auto& h : hyps) {
    if (h.bona_scores.size() != h.frame_assignments.size()) {
      throw ShapeError("'" + h.utt_id + "': score and label frame counts differ");
    }
  }
  return hyps;
}

int lcm_violations(const DiarizationHypothesis& hyp, double threshold) {
  int n = 0;
  for (std::size_t t = 0; t < hyp.frame_assignments.size(); ++t) {
    if (hyp.bona_scores[t] >= threshold && hyp.frame_assignments[t] != kBonaAssignment) ++n;
  }
  return n;
}

void dump_embeddings(const fs::path& path, const ModelParams& params, const ExperimentConfig& config,
                     const std::vector<FeatUtterance>& utts,
                     const std::vector<DiarizationHypothesis>& hyps) {
  const auto vocab = config.corpus.vocabulary();
  std::ostringstream os;
  const int D = config.model.embedding_dim();
  os << "utt_id\tframe";
  for (int j = 0; j < D; ++j) os << "\te_" << j;
  os << "\tlabel\tcluster\n";
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto out = forward(params, config.model, utts[i].features);
    const Matrix& E = out.E_prime();
    for (Eigen::Index t = 0; t < E.rows(); ++t) {
      os << utts[i].utt_id << '\t' << t;
      for (Eigen::Index j = 0; j < E.cols(); ++j) os << '\t' << exact(E(t, j));
      const auto tt = static_cast<std::size_t>(t);
      const int c = hyps[i].frame_assignments[tt];
      os << '\t' << vocab.name(utts[i].frame_labels.labels[tt]) << '\t'
         << (c == kBonaAssignment ? std::string(kBonaLabel) : "C" + std::to_string(c)) << '\n';
    }
  }
  io::write_text_file(path, os.str());
}

RunSummary run_experiment(const ExperimentConfig& config, const Corpus& corpus, std::uint64_t seed,
                          const std::optional<fs::path>& out_dir, std::ostream* log,
                          ModelParams* trained) {
  config.validate();
  ExperimentConfig echo = config;
  echo.seeds = {seed};
  const std::string ini = to_ini(echo);

  std::ostringstream steps, epochs;
  steps << "epoch\tstep\tloss_loc\tloss_dia\tloss_token\ttotal\n";
  epochs << "epoch\ttrain_total\tdev_loc\tdev_dia\tdev_token\tdev_total\tdev_jer\n";
  TrainCallbacks cb;
  cb.on_step = [&](const StepLog& s) {
    steps << s.epoch << '\t' << s.step << '\t' << exact(s.loss.loss_loc) << '\t'
          << exact(s.loss.loss_dia) << '\t' << exact(s.loss.loss_token) << '\t'
          << exact(s.loss.total) << '\n';
  };
  cb.on_epoch = [&](const EpochLog& e) {
    epochs << e.epoch << '\t' << exact(e.train.total) << '\t' << exact(e.dev.loss_loc) << '\t'
           << exact(e.dev.loss_dia) << '\t' << exact(e.dev.loss_token) << '\t' << exact(e.dev.total)
           << '\t' << (e.dev_jer ? exact(*e.dev_jer) : std::string("-")) << '\n';
    if (log) {
      *log << config.name << " seed " << seed << " epoch " << e.epoch << ": train " << e.train.total
           << " dev " << e.dev.total << '\n';
    }
  };
  int last_saved = -1;
  cb.on_best = [&](const ModelParams& p, int epoch) {
    if (!out_dir || epoch == last_saved) return;
    save_checkpoint(*out_dir / "best.ckpt", p, ini);
    last_saved = epoch;
  };

  if (out_dir) {
    fs::create_directories(*out_dir);
    io::write_text_file(*out_dir / "config.ini", ini);
    save_checkpoint(*out_dir / "best.ckpt", init_model(config.model, seed), ini);
    last_saved = 0;
  }
  auto flush_logs = [&] {
    if (!out_dir) return;
    io::write_text_file(*out_dir / "train_log.tsv", steps.str());
    io::write_text_file(*out_dir / "epochs.tsv", epochs.str());
  };

  TrainResult result;
  try {
    result = train_model(config.model, config.train, config.inference, corpus, seed, cb);
  } catch (const DivergenceError&) {
    flush_logs();
    throw;
  }
  flush_logs();
  // Evaluate exactly what the checkpoint holds, so evaluate runs reproduce it.
  round_to_float(result.best);
  if (out_dir) save_checkpoint(*out_dir / "best.ckpt", result.best, ini);

  RunSummary summary;
  summary.seed = seed;
  summary.best_epoch = result.best_epoch;
  const std::pair<const char*, const std::vector<FeatUtterance>*> parts[] = {{"dev", &corpus.dev},
                                                                            {"eval", &corpus.eval}};
  for (const auto& [name, utts] : parts) {
    auto r = evaluate_partition(result.best, config, *utts, name);
    if (out_dir) {
      write_hypotheses(*out_dir, name, r.hyps, config.corpus.resolution);
      io::write_text_file(*out_dir / (std::string(name) + ".report.json"),
                          report_json(r.report, name, echo, seed));
    }
    (std::string(name) == "dev" ? summary.dev : summary.eval) = std::move(r.report);
  }
  if (log) {
    *log << config.name << " seed " << seed << " best epoch " << summary.best_epoch
         << ": dev JI_bona " << summary.dev.ji_bona << " JER_spoof " << summary.dev.jer_spoof
         << " | eval JI_bona " << summary.eval.ji_bona << " JER_spoof " << summary.eval.jer_spoof
         << '\n';
  }
  if (trained) *trained = std::move(result.best);
  return summary;
}

Stat summarize(const std::vector<double>& values) {
  Stat s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.spread = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

const CellResult& AblationTable::cell(std::string_view name) const {
  for (const auto& c : cells) {
    if (c.name == name) return c;
  }
  throw ConfigError("no ablation cell '" + std::string(name) + "'");
}

AblationTable run_ablation(const AblationGrid& grid, const std::optional<fs::path>& out_dir,
                           std::ostream* log) {
  AblationTable table;
  table.name = grid.name;
  std::map<std::string, Corpus> corpora;  // keyed by corpus source
  for (const auto& cell : grid.cells) {
    CellResult row;
    row.name = cell.name;
    row.overrides = cell.overrides;
    const ExperimentConfig config = cell_config(grid, cell);
    const std::string key =
        config.corpus_dir.empty() ? corpus_spec_to_ini(config.corpus) : "dir:" + config.corpus_dir;
    auto it = corpora.find(key);
    if (it == corpora.end()) it = corpora.emplace(key, obtain_corpus(config)).first;
    std::vector<double> eji, ejer, dji, djer;
    for (std::uint64_t seed : config.seeds) {
      CellSeedResult r;
      r.seed = seed;
      try {
        std::optional<fs::path> dir;
        if (out_dir) dir = *out_dir / cell.name / ("seed_" + std::to_string(seed));
        const auto s = run_experiment(config, it->second, seed, dir, log);
        r.ok = true;
        r.best_epoch = s.best_epoch;
        r.eval_ji_bona = s.eval.ji_bona;
        r.eval_jer_spoof = s.eval.jer_spoof;
        r.dev_ji_bona = s.dev.ji_bona;
        r.dev_jer_spoof = s.dev.jer_spoof;
        r.eval_eer_utt = s.eval.eer_utt;
        eji.push_back(r.eval_ji_bona);
        ejer.push_back(r.eval_jer_spoof);
        dji.push_back(r.dev_ji_bona);
        djer.push_back(r.dev_jer_spoof);
      } catch (const Error& e) {
        r.error = e.what();
        if (log) *log << config.name << " seed " << seed << " failed: " << e.what() << '\n';
      }
      row.seeds.push_back(r);
    }
    row.eval_ji_bona = summarize(eji);
    row.eval_jer_spoof = summarize(ejer);
    row.dev_ji_bona = summarize(dji);
    row.dev_jer_spoof = summarize(djer);
    table.cells.push_back(std::move(row));
  }
  if (out_dir) {
    io::write_text_file(*out_dir / "table.json", table_json(table));
    io::write_text_file(*out_dir / "table.txt", table_text(table));
  }
  return table;
}

std::string table_json(const AblationTable& table) {
  auto stat = [](const Stat& s) { return json{{"mean", s.mean}, {"spread", s.spread}, {"n", s.n}}; };
  json cells = json::array();
  for (const auto& c : table.cells) {
    json overrides = json::object();
    for (const auto& o : c.overrides) overrides[o.section + "." + o.key] = o.value;
    json seeds = json::array();
    for (const auto& s : c.seeds) {
      json j{{"seed", s.seed}, {"ok", s.ok}};
      if (s.ok) {
        j["best_epoch"] = s.best_epoch;
        j["eval_ji_bona"] = s.eval_ji_bona;
        j["eval_jer_spoof"] = s.eval_jer_spoof;
        j["dev_ji_bona"] = s.dev_ji_bona;
        j["dev_jer_spoof"] = s.dev_jer_spoof;
        j["eval_eer_utt"] = s.eval_eer_utt ? json(*s.eval_eer_utt) : json(nullptr);
      } else {
        j["error"] = s.error;
      }
      seeds.push_back(j);
    }
    cells.push_back({{"name", c.name},
                     {"overrides", overrides},
                     {"eval_ji_bona", stat(c.eval_ji_bona)},
                     {"eval_jer_spoof", stat(c.eval_jer_spoof)},
                     {"dev_ji_bona", stat(c.dev_ji_bona)},
                     {"dev_jer_spoof", stat(c.dev_jer_spoof)},
                     {"seeds", seeds}});
  }
  json j{{"grid", table.name}, {"tool", "spoofdiar"}, {"version", kVersion}, {"cells", cells}};
  return j.dump(2) + "\n";
}

std::string table_text(const AblationTable& table) {
  std::ostringstream os;
  char buf[256];
  os << "grid: " << table.name << "\n";
  std::snprintf(buf, sizeof(buf), "%-20s %18s %18s %18s %18s  %s\n", "cell", "eval JI_bona %",
                "eval JER_spoof %", "dev JI_bona %", "dev JER_spoof %", "seeds ok");
  os << buf;
  for (const auto& c : table.cells) {
    int ok = 0;
    for (const auto& s : c.seeds) ok += s.ok;
    auto cell = [](const Stat& s) {
      char b[64];
      std::snprintf(b, sizeof(b), "%.2f +- %.2f", 100.0 * s.mean, 100.0 * s.spread);
      return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%-20s %18s %18s %18s %18s  %d/%zu\n", c.name.c_str(),
                  cell(c.eval_ji_bona).c_str(), cell(c.eval_jer_spoof).c_str(),
                  cell(c.dev_ji_bona).c_str(), cell(c.dev_jer_spoof).c_str(), ok, c.seeds.size());
    os << buf;
  }
  return os.str();
}

}  // namespace spoofdiar
