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

// Jaccard-style spoof diarization scoring.
//
//   JI_bona   = 1/|D| sum_j (FA_bona,j + MD_bona,j) / TOTAL_bona,j
//   JER_spoof = sum_j sum_{A in A_j} (FA_A,j + MD_A,j) / TOTAL_A,j  /  sum_j |A_j|
//
// TOTAL is the size of the union of reference and hypothesis frames for the
// label. Durations are frame counts over speech frames. Hypothesis clusters
// are mapped to reference attacks per utterance by maximum-overlap one-to-one
// assignment.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofdiar/label_timeline.hpp"

namespace spoofdiar {

struct AttackScore {
  int attack = 0;           // reference class index
  int mapped_cluster = -1;  // -1 when no cluster maps to it
  int fa = 0;
  int md = 0;
  int total = 0;

  double error() const { return total > 0 ? static_cast<double>(fa + md) / total : 0.0; }
};

struct UttScore {
  std::string utt_id;
  int fa_bona = 0;
  int md_bona = 0;
  int total_bona = 0;
  std::vector<AttackScore> attacks;

  double ji_bona() const {
    return total_bona > 0 ? static_cast<double>(fa_bona + md_bona) / total_bona : 0.0;
  }
  double jer_sum() const;
};

struct DiarizationReport {
  double ji_bona = 0.0;
  double jer_spoof = 0.0;
  int n_utts = 0;
  /// Utterances left out of JI_bona because neither side has bona frames.
  int n_ji_skipped = 0;
  int n_attacks = 0;
  std::vector<UttScore> utts;
  std::optional<double> eer_frame;
  std::optional<double> eer_utt;
};

/// Max-weight one-to-one assignment on a rows x cols weight matrix (Hungarian
/// method on the negated weights). Returns col index per row, -1 if unmatched.
/// `tiebreak` (same shape, optional) is minimized among maximal assignments; its
/// entries must sum to less than 1 over any assignment.
std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& weight,
                                    const std::vector<std::vector<double>>* tiebreak = nullptr);

/// Cluster -> reference attack. Clusters / attacks without positive overlap
/// stay unmapped. Among maximum-overlap assignments the one with the lowest
/// total Jaccard error is used.
std::map<int, int> map_clusters(const FrameLabels& reference, std::span<const int> hypothesis,
                                const SpeechMask* mask);

UttScore score_utterance(const FrameLabels& reference, std::span<const int> hypothesis,
                         const SpeechMask* mask);
/// Scores under a given cluster -> attack mapping instead of the optimal one.
UttScore score_utterance(const FrameLabels& reference, std::span<const int> hypothesis,
                         const SpeechMask* mask, const std::map<int, int>& mapping);

double ji_bona(std::span<const UttScore> scores, int* skipped = nullptr);
double jer_spoof(std::span<const UttScore> scores);

struct ScoredUtterance {
  const FrameLabels* reference;
  const std::vector<int>* hypothesis;
  const SpeechMask* mask;  // may be null
};

DiarizationReport score_corpus(std::span<const ScoredUtterance> utts);

/// Equal error rate; labels[i] == 1 marks a positive (bona fide) sample whose
/// score should be high. Throws Error when either class is missing.
double eer(std::span<const double> scores, std::span<const int> labels);

enum class UttPooling { min, mean };

/// Utterance bona score pooled over speech frames.
double pool_utterance_score(std::span<const double> frame_scores, const SpeechMask* mask,
                            UttPooling pooling);

}  // namespace spoofdiar
