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

// Forward outputs -> labeled frames: bona scoring, agglomerative clustering of
// spoof frames under cosine distance, and the label-based CM constraint (LCM)
// that keeps every frame scoring >= threshold bona fide.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofdiar/attractor_model.hpp"
#include "spoofdiar/label_timeline.hpp"
#include "spoofdiar/synthetic_corpus.hpp"

namespace spoofdiar {

enum class Linkage { average, complete, single };

enum class ClusterScope {
  /// merged -> predicted_spoof, dual_branch -> all_frames
  automatic,
  /// Cluster only frames below the threshold, then label.
  predicted_spoof,
  /// Cluster every speech frame (k + 1 clusters), then apply LCM.
  all_frames,
};

struct InferenceConfig {
  double threshold = 0.5;
  Linkage linkage = Linkage::average;
  bool oracle_k = true;
  std::optional<int> k_override;
  ClusterScope scope = ClusterScope::automatic;

  void validate() const;
};

/// 0 == bona, c >= 1 == cluster c.
inline constexpr int kBonaAssignment = 0;

struct DiarizationHypothesis {
  std::string utt_id;
  std::vector<int> frame_assignments;
  std::vector<double> bona_scores;

  int num_frames() const { return static_cast<int>(frame_assignments.size()); }
  int num_clusters() const;
};

/// P_loc[:, 0] (bona attractor / bona head column).
std::vector<double> bona_scores(const ForwardOutputs& out);

/// Linkage values closer than this are ties, so that equal distances reached
/// through different rounding still merge in the same order.
inline constexpr double kLinkageTieTolerance = 1e-12;

/// Bottom-up clustering of rows of X under 1 - cosine similarity, stopped at k
/// clusters. Ties go to the lowest (i, j) pair of cluster representatives,
/// where a cluster is represented by its smallest member. Returned ids are
/// 1-based and numbered by first occurrence.
std::vector<int> agglomerative_cluster(const Matrix& X, int k, Linkage linkage);

/// Frame t -> bona when score_t >= threshold, otherwise the next id from
/// `cluster_ids` (one per sub-threshold frame, in frame order).
std::vector<int> apply_lcm(std::span<const int> cluster_ids, std::span<const double> scores,
                           double threshold);

/// Number of distinct spoof classes on speech frames of the reference.
int reference_spoof_count(const FrameLabels& reference, const SpeechMask* mask);

/// Clustering + LCM on already computed outputs. Non-speech frames below the
/// threshold (mask false) are not clustered; they join the cluster whose mean
/// direction is closest.
DiarizationHypothesis diarize_outputs(const ForwardOutputs& out, const ModelConfig& config,
                                      const InferenceConfig& infer, const std::string& utt_id,
                                      const SpeechMask* mask, std::optional<int> reference_k);

DiarizationHypothesis diarize_utterance(const ModelParams& params, const ModelConfig& config,
                                        const InferenceConfig& infer, const FeatUtterance& utt,
                                        std::optional<int> reference_k);

/// Label names for hypothesis files: bona, C1..Cmax.
std::vector<std::string> hypothesis_label_names(int max_cluster);
Timeline hypothesis_timeline(const DiarizationHypothesis& hyp, double resolution);

}  // namespace spoofdiar
