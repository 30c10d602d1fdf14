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

#include "spoofdiar/synthetic_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "spoofdiar/binary_io.hpp"
#include "spoofdiar/config.hpp"
#include "spoofdiar/errors.hpp"

namespace spoofdiar {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[4] = {'S', 'D', 'F', '1'};
constexpr Partition kPartitions[] = {Partition::train, Partition::dev, Partition::eval};

std::string utt_name(Partition p, int index) {
  std::ostringstream os;
  os << partition_name(p) << '_';
  os.width(4);
  os.fill('0');
  os << index;
  return os.str();
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::dev: return "dev";
    case Partition::eval: return "eval";
  }
  return "?";
}

Partition parse_partition(std::string_view name) {
  for (Partition p : kPartitions) {
    if (name == partition_name(p)) return p;
  }
  throw ConfigError("unknown partition '" + std::string(name) + "' (train, dev, eval)");
}

void CorpusSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("corpus." + field + ": " + why);
  };
  if (n_train <= 0) fail("n_train", "must be > 0");
  if (n_dev <= 0) fail("n_dev", "must be > 0");
  if (n_eval <= 0) fail("n_eval", "must be > 0");
  if (num_classes < 2) fail("num_classes", "need bona plus at least one spoof method");
  if (d_feat <= 0) fail("d_feat", "must be > 0");
  if (num_classes > d_feat) fail("num_classes", "orthonormal class means need num_classes <= d_feat");
  if (min_frames <= 0 || max_frames < min_frames) fail("min_frames", "need 0 < min_frames <= max_frames");
  if (min_segment <= 0 || max_segment < min_segment) {
    fail("min_segment", "need 0 < min_segment <= max_segment");
  }
  if (2 * min_segment > min_frames) {
    fail("min_segment", "two segments of min_segment frames do not fit in min_frames");
  }
  if (!(class_separation > 0.0)) fail("class_separation", "must be > 0");
  if (!(noise_std >= 0.0)) fail("noise_std", "must be >= 0");
  if (!(channel_std >= 0.0)) fail("channel_std", "must be >= 0");
  if (unseen_eval_methods < 0 || unseen_eval_methods >= num_classes - 1) {
    fail("unseen_eval_methods", "must satisfy 0 <= unseen < num_classes - 1");
  }
  if (unseen_eval_methods > n_eval) fail("unseen_eval_methods", "more unseen methods than eval utterances");
  if (!(bona_fraction > 0.0 && bona_fraction < 1.0)) fail("bona_fraction", "must be in (0, 1)");
  if (!(bona_utterance_fraction >= 0.0 && bona_utterance_fraction < bona_fraction)) {
    fail("bona_utterance_fraction", "must be in [0, bona_fraction)");
  }
  if (max_silence_frames < 0) fail("max_silence_frames", "must be >= 0");
  if (!(resolution > 0.0)) fail("resolution", "must be > 0");
}

const std::vector<FeatUtterance>& Corpus::partition(Partition p) const {
  switch (p) {
    case Partition::train: return train;
    case Partition::dev: return dev;
    case Partition::eval: return eval;
  }
  throw ConfigError("bad partition");
}

std::vector<bool> concat_frames(const FrameLabels& frames) {
  const auto& y = frames.labels;
  std::vector<bool> out(y.size(), false);
  for (std::size_t t = 1; t < y.size(); ++t) {
    if ((y[t - 1] == 0) != (y[t] == 0)) {
      out[t - 1] = true;
      out[t] = true;
    }
  }
  return out;
}

CorpusGenerator::CorpusGenerator(CorpusSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed),
                    static_cast<std::uint32_t>(spec_.seed >> 32), 0x6d65616eU};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(spec_.d_feat, spec_.num_classes);
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  }
  // Gram-Schmidt keeps class c a function of the first c + 1 draws only.
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index j = 0; j < c; ++j) g.col(c) -= g.col(j).dot(g.col(c)) * g.col(j);
    g.col(c).normalize();
  }
  means_ = g.transpose() * spec_.class_separation;
}

std::vector<int> CorpusGenerator::methods(Partition p) const {
  const int last = p == Partition::eval ? spec_.num_classes - 1 : spec_.seen_classes() - 1;
  std::vector<int> m;
  for (int c = 1; c <= last; ++c) m.push_back(c);
  return m;
}

std::mt19937_64 CorpusGenerator::utterance_rng(Partition p, int index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed),
                    static_cast<std::uint32_t>(spec_.seed >> 32),
                    static_cast<std::uint32_t>(p) + 1U, static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

FeatUtterance CorpusGenerator::generate_utterance(std::mt19937_64& rng,
                                                  const std::vector<int>& methods,
                                                  std::string utt_id,
                                                  std::optional<int> forced_method) const {
  if (methods.empty()) throw ConfigError("generate_utterance: no spoof methods");
  const CorpusSpec& s = spec_;
  const int n_speech = uniform_int(rng, s.min_frames, s.max_frames);
  const int lead = uniform_int(rng, 0, s.max_silence_frames);
  const int trail = uniform_int(rng, 0, s.max_silence_frames);
  std::bernoulli_distribution all_bona(s.bona_utterance_fraction);
  const bool bona_only = !forced_method && all_bona(rng);

  // Bona share inside partially spoofed utterances, so that the corpus-wide
  // share matches bona_fraction.
  const double u = s.bona_utterance_fraction;
  const double p = (s.bona_fraction - u) / (1.0 - u);
  const double bona_scale = p / (1.0 - p);

  std::vector<int> speech_labels;
  speech_labels.reserve(static_cast<std::size_t>(n_speech));
  if (bona_only) {
    speech_labels.assign(static_cast<std::size_t>(n_speech), 0);
  } else {
    bool bona = true;
    bool first_spoof = true;
    while (static_cast<int>(speech_labels.size()) < n_speech) {
      const int left = n_speech - static_cast<int>(speech_labels.size());
      int len = uniform_int(rng, s.min_segment, s.max_segment);
      int label = 0;
      if (bona) {
        len = std::max(1, static_cast<int>(std::lround(len * bona_scale)));
        // Leave room for at least one spoofed frame.
        if (first_spoof) len = std::min(len, left - 1);
      } else {
        const int pick = uniform_int(rng, 0, static_cast<int>(methods.size()) - 1);
        label = first_spoof && forced_method ? *forced_method : methods[static_cast<std::size_t>(pick)];
        first_spoof = false;
      }
      len = std::min(len, left);
      speech_labels.insert(speech_labels.end(), static_cast<std::size_t>(len), label);
      bona = !bona;
    }
  }

  const int T = lead + n_speech + trail;
  FeatUtterance utt;
  utt.utt_id = utt_id;
  utt.frame_labels.utt_id = utt_id;
  utt.frame_labels.resolution = s.resolution;
  utt.frame_labels.labels.assign(static_cast<std::size_t>(lead), speech_labels.front());
  utt.frame_labels.labels.insert(utt.frame_labels.labels.end(), speech_labels.begin(),
                                 speech_labels.end());
  utt.frame_labels.labels.insert(utt.frame_labels.labels.end(), static_cast<std::size_t>(trail),
                                 speech_labels.back());
  utt.speech_mask.assign(static_cast<std::size_t>(T), true);
  for (int t = 0; t < lead; ++t) utt.speech_mask[static_cast<std::size_t>(t)] = false;
  for (int t = lead + n_speech; t < T; ++t) utt.speech_mask[static_cast<std::size_t>(t)] = false;

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd channel = Eigen::RowVectorXd::Zero(s.d_feat);
  if (s.channel_std > 0.0) {
    for (Eigen::Index j = 0; j < channel.size(); ++j) channel(j) = s.channel_std * normal(rng);
  }
  utt.features.resize(T, s.d_feat);
  for (int t = 0; t < T; ++t) {
    const bool speech = utt.speech_mask[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < s.d_feat; ++j) {
      double v = s.noise_std > 0.0 ? s.noise_std * normal(rng) : 0.0;
      if (speech) v += means_(utt.frame_labels.labels[static_cast<std::size_t>(t)], j) + channel(j);
      utt.features(t, j) = static_cast<double>(static_cast<float>(v));
    }
  }
  return utt;
}

Corpus CorpusGenerator::generate_corpus() const {
  Corpus corpus;
  corpus.spec = spec_;
  for (Partition p : kPartitions) {
    const int n = p == Partition::train ? spec_.n_train
                  : p == Partition::dev ? spec_.n_dev
                                        : spec_.n_eval;
    const auto m = methods(p);
    auto& out = p == Partition::train ? corpus.train : p == Partition::dev ? corpus.dev : corpus.eval;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto rng = utterance_rng(p, i);
      std::optional<int> forced;
      // The first eval utterances each carry one unseen method.
      if (p == Partition::eval && i < spec_.unseen_eval_methods) forced = spec_.seen_classes() + i;
      out.push_back(generate_utterance(rng, m, utt_name(p, i), forced));
    }
  }
  return corpus;
}

Corpus generate_corpus(const CorpusSpec& spec) { return CorpusGenerator(spec).generate_corpus(); }

double bona_frame_fraction(const std::vector<FeatUtterance>& utts) {
  std::size_t bona = 0, total = 0;
  for (const auto& u : utts) {
    for (std::size_t t = 0; t < u.frame_labels.labels.size(); ++t) {
      if (!u.speech_mask.empty() && !u.speech_mask[t]) continue;
      bona += u.frame_labels.labels[t] == 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(bona) / static_cast<double>(total) : 0.0;
}

void write_features(const fs::path& path, const Eigen::MatrixXd& features) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kFeatureMagic, 4);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(features.rows()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(features.cols()));
  io::write_le<std::uint32_t>(os, 0);
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      io::write_le<float>(os, static_cast<float>(features(t, j)));
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_features(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kFeatureMagic)) {
    throw IoError(path.string() + ": not a feature file");
  }
  const auto T = io::read_le<std::uint32_t>(is);
  const auto d = io::read_le<std::uint32_t>(is);
  (void)io::read_le<std::uint32_t>(is);
  Eigen::MatrixXd f(T, d);
  for (Eigen::Index t = 0; t < f.rows(); ++t) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(t, j) = io::read_le<float>(is);
  }
  return f;
}

namespace {

std::string labels_text(const std::vector<FeatUtterance>& utts, const LabelVocabulary& vocab) {
  std::vector<Timeline> tl;
  tl.reserve(utts.size());
  for (const auto& u : utts) tl.push_back(frames_to_timeline(u.frame_labels));
  return serialize_segments(tl, vocab.classes());
}

std::string mask_text(const std::vector<FeatUtterance>& utts, double resolution) {
  std::vector<Timeline> tl;
  tl.reserve(utts.size());
  for (const auto& u : utts) tl.push_back(mask_to_timeline(u.utt_id, u.speech_mask, resolution));
  return serialize_segments(tl, mask_labels().names);
}

struct ManifestRow {
  std::string utt_id;
  int n_frames = 0;
  Partition partition = Partition::train;
};

std::vector<ManifestRow> read_manifest(const fs::path& dir) {
  std::istringstream in(io::read_text_file(dir / "manifest.tsv"));
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::istringstream ls(line);
    ManifestRow r;
    std::string part;
    if (!(ls >> r.utt_id >> r.n_frames >> part)) throw ParseError(lineno, "bad manifest row");
    r.partition = parse_partition(part);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::string write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "feats");
  std::ostringstream manifest;
  manifest << "utt_id\tn_frames\tpartition\n";
  for (Partition p : kPartitions) {
    for (const auto& u : corpus.partition(p)) {
      manifest << u.utt_id << '\t' << u.num_frames() << '\t' << partition_name(p) << '\n';
      write_features(dir / "feats" / (u.utt_id + ".f32"), u.features);
    }
  }
  io::write_text_file(dir / "manifest.tsv", manifest.str());
  io::write_text_file(dir / "corpus.ini", corpus_spec_to_ini(corpus.spec));
  const auto vocab = corpus.spec.vocabulary();
  for (Partition p : kPartitions) {
    const std::string name = partition_name(p);
    io::write_text_file(dir / (name + ".labels"), labels_text(corpus.partition(p), vocab));
    io::write_text_file(dir / (name + ".mask"), mask_text(corpus.partition(p), corpus.spec.resolution));
  }
  return corpus_checksum(dir);
}

Corpus read_corpus(const fs::path& dir) {
  Corpus corpus;
  corpus.spec = parse_corpus_spec(io::read_text_file(dir / "corpus.ini"));
  corpus.spec.validate();
  const auto vocab = corpus.spec.vocabulary();
  const double res = corpus.spec.resolution;
  std::map<std::string, FrameLabels> labels;
  std::map<std::string, SpeechMask> masks;
  for (Partition p : kPartitions) {
    const std::string name = partition_name(p);
    for (const auto& tl : parse_segments(io::read_text_file(dir / (name + ".labels")), vocab)) {
      labels[tl.utt_id] = timeline_to_frames(tl, res);
    }
    for (const auto& tl : parse_segments(io::read_text_file(dir / (name + ".mask")), mask_labels())) {
      masks[tl.utt_id] = timeline_to_mask(tl, res);
    }
  }
  for (const auto& row : read_manifest(dir)) {
    FeatUtterance u;
    u.utt_id = row.utt_id;
    u.features = read_features(dir / "feats" / (row.utt_id + ".f32"));
    auto li = labels.find(row.utt_id);
    auto mi = masks.find(row.utt_id);
    if (li == labels.end() || mi == masks.end()) {
      throw ValidationError("'" + row.utt_id + "' has no labels or mask");
    }
    u.frame_labels = li->second;
    u.speech_mask = mi->second;
    if (u.features.rows() != row.n_frames || u.frame_labels.num_frames() != row.n_frames ||
        static_cast<int>(u.speech_mask.size()) != row.n_frames) {
      throw ShapeError("'" + row.utt_id + "': features, labels and mask lengths disagree");
    }
    if (u.features.cols() != corpus.spec.d_feat) throw ShapeError("'" + row.utt_id + "': bad d_feat");
    auto& part = row.partition == Partition::train ? corpus.train
                 : row.partition == Partition::dev ? corpus.dev
                                                   : corpus.eval;
    part.push_back(std::move(u));
  }
  return corpus;
}

std::string corpus_checksum(const fs::path& dir) {
  std::string blob = io::read_text_file(dir / "manifest.tsv");
  blob += io::read_text_file(dir / "corpus.ini");
  for (Partition p : kPartitions) {
    const std::string name = partition_name(p);
    blob += io::read_text_file(dir / (name + ".labels"));
    blob += io::read_text_file(dir / (name + ".mask"));
  }
  for (const auto& row : read_manifest(dir)) {
    blob += io::read_text_file(dir / "feats" / (row.utt_id + ".f32"));
  }
  return io::sha256_hex(blob);
}

}  // namespace spoofdiar
