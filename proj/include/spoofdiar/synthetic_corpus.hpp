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

// Feature-level partial-spoof corpus generator.
//
// Each utterance alternates bona fide and spoofed segments. A frame of class c
// is mu_c + N(0, noise_std^2 I) + a per-utterance channel offset, where the
// class means are orthonormal random directions scaled by class_separation.
// Leading / trailing non-speech frames carry noise only and are masked out.
//
// On disk:
//   manifest.tsv            utt_id, n_frames, partition
//   corpus.ini              generator settings
//   feats/<utt_id>.f32      16-byte header ("SDF1", T, d_feat, 0) + T*d_feat
//                           little-endian float32, row-major
//   <partition>.labels      label file (bona, A1, ...)
//   <partition>.mask        label file over {speech, nonspeech}

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spoofdiar/label_timeline.hpp"

namespace spoofdiar {

enum class Partition { train, dev, eval };

const char* partition_name(Partition p);
Partition parse_partition(std::string_view name);

struct CorpusSpec {
  int n_train = 400;
  int n_dev = 50;
  int n_eval = 100;
  int num_classes = 5;  // bona + spoof methods, including unseen ones
  int d_feat = 16;
  int min_frames = 50;
  int max_frames = 90;
  int min_segment = 8;
  int max_segment = 24;
  double class_separation = 1.0;
  double noise_std = 1.0;
  int unseen_eval_methods = 1;
  double bona_fraction = 0.55;
  /// Share of utterances that contain no spoofed frame at all.
  double bona_utterance_fraction = 0.1;
  int max_silence_frames = 2;
  /// Std of a per-utterance offset added to every speech frame.
  double channel_std = 0.0;
  double resolution = kDefaultResolution;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Classes present in train/dev: bona + seen methods.
  int seen_classes() const { return num_classes - unseen_eval_methods; }
  LabelVocabulary vocabulary() const { return LabelVocabulary::with_methods(num_classes); }
};

struct FeatUtterance {
  std::string utt_id;
  Eigen::MatrixXd features;  // T x d_feat, values are float32-representable
  FrameLabels frame_labels;
  SpeechMask speech_mask;

  int num_frames() const { return frame_labels.num_frames(); }
};

struct Corpus {
  CorpusSpec spec;
  std::vector<FeatUtterance> train;
  std::vector<FeatUtterance> dev;
  std::vector<FeatUtterance> eval;

  const std::vector<FeatUtterance>& partition(Partition p) const;
};

/// Frames adjacent to a bona/spoof boundary: both frames on either side of
/// every transition between bona and a spoof class.
std::vector<bool> concat_frames(const FrameLabels& frames);

class CorpusGenerator {
 public:
  explicit CorpusGenerator(CorpusSpec spec);

  const CorpusSpec& spec() const { return spec_; }
  /// num_classes x d_feat class means (row c = mean of class c).
  const Eigen::MatrixXd& class_means() const { return means_; }

  /// Spoof method ids usable in a partition (1-based class indices).
  std::vector<int> methods(Partition p) const;

  /// Draws one utterance. When `forced_method` is set the utterance is
  /// partially spoofed and its first spoof segment uses that method.
  FeatUtterance generate_utterance(std::mt19937_64& rng, const std::vector<int>& methods,
                                   std::string utt_id,
                                   std::optional<int> forced_method = std::nullopt) const;

  /// Deterministic per-utterance stream.
  std::mt19937_64 utterance_rng(Partition p, int index) const;

  Corpus generate_corpus() const;

 private:
  CorpusSpec spec_;
  Eigen::MatrixXd means_;
};

/// Generates and returns the corpus (same as CorpusGenerator::generate_corpus).
Corpus generate_corpus(const CorpusSpec& spec);

/// Writes the corpus directory; returns the SHA-256 checksum of its contents.
std::string write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);
/// SHA-256 over manifest, settings, label/mask files and features, in manifest
/// order.
std::string corpus_checksum(const std::filesystem::path& dir);

void write_features(const std::filesystem::path& path, const Eigen::MatrixXd& features);
Eigen::MatrixXd read_features(const std::filesystem::path& path);

/// Fraction of frames labeled bona over a set of utterances.
double bona_frame_fraction(const std::vector<FeatUtterance>& utts);

}  // namespace spoofdiar
