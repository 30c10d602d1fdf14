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

#include "spoofdiar/inference.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "spoofdiar/errors.hpp"
#include "spoofdiar/objectives.hpp"

namespace spoofdiar {

void InferenceConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("inference.threshold must be in (0, 1)");
  }
  if (k_override && *k_override < 1) throw ConfigError("inference.k must be >= 1");
}

int DiarizationHypothesis::num_clusters() const {
  int m = 0;
  for (int a : frame_assignments) m = std::max(m, a);
  return m;
}

std::vector<double> bona_scores(const ForwardOutputs& out) {
  const Matrix& p = out.P_loc();
  std::vector<double> scores(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index t = 0; t < p.rows(); ++t) scores[static_cast<std::size_t>(t)] = p(t, 0);
  return scores;
}

namespace {

Matrix normalize_rows(const Matrix& X) {
  Matrix out = X;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r) /= std::max(X.row(r).norm(), kNormEpsilon);
  }
  return out;
}

std::vector<int> renumber_by_first_occurrence(const std::vector<int>& raw) {
  std::map<int, int> ids;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = ids.emplace(raw[i], static_cast<int>(ids.size()) + 1);
    out[i] = it->second;
  }
  return out;
}

}  // namespace

std::vector<int> agglomerative_cluster(const Matrix& X, int k, Linkage linkage) {
  const auto n = static_cast<int>(X.rows());
  if (n == 0) return {};
  if (k < 1) throw ConfigError("agglomerative_cluster: k must be >= 1");
  if (n < k) {
    throw ConfigError("agglomerative_cluster: " + std::to_string(n) + " points < k = " +
                      std::to_string(k));
  }
  const Matrix xn = normalize_rows(X);
  Matrix dist = Matrix::Ones(n, n) - xn * xn.transpose();

  std::vector<int> owner(static_cast<std::size_t>(n));
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<int> active(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) owner[static_cast<std::size_t>(i)] = active[static_cast<std::size_t>(i)] = i;

  while (static_cast<int>(active.size()) > k) {
    std::size_t best_a = 0, best_b = 1;
    double best = dist(active[0], active[1]);
    // Pairs are scanned in (representative, representative) order, so only a
    // clearly smaller value displaces the current best.
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double v = dist(active[a], active[b]);
        if (v < best - kLinkageTieTolerance) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    }
    const int i = active[best_a];
    const int j = active[best_b];
    const double ni = size[static_cast<std::size_t>(i)];
    const double nj = size[static_cast<std::size_t>(j)];
    for (int m : active) {
      if (m == i || m == j) continue;
      double v = 0.0;
      switch (linkage) {
        case Linkage::average: v = (ni * dist(i, m) + nj * dist(j, m)) / (ni + nj); break;
        case Linkage::complete: v = std::max(dist(i, m), dist(j, m)); break;
        case Linkage::single: v = std::min(dist(i, m), dist(j, m)); break;
      }
      dist(i, m) = dist(m, i) = v;
    }
    size[static_cast<std::size_t>(i)] += size[static_cast<std::size_t>(j)];
    for (auto& o : owner) {
      if (o == j) o = i;
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  return renumber_by_first_occurrence(owner);
}

std::vector<int> apply_lcm(std::span<const int> cluster_ids, std::span<const double> scores,
                           double threshold) {
  std::vector<int> out(scores.size(), kBonaAssignment);
  std::size_t next = 0;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (scores[t] >= threshold) continue;
    if (next >= cluster_ids.size()) {
      throw ShapeError("apply_lcm: fewer cluster ids than sub-threshold frames");
    }
    out[t] = cluster_ids[next++];
  }
  if (next != cluster_ids.size()) {
    throw ShapeError("apply_lcm: " + std::to_string(cluster_ids.size()) +
                     " cluster ids for " + std::to_string(next) + " sub-threshold frames");
  }
  return out;
}

int reference_spoof_count(const FrameLabels& reference, const SpeechMask* mask) {
  std::set<int> methods;
  for (std::size_t t = 0; t < reference.labels.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    if (reference.labels[t] != 0) methods.insert(reference.labels[t]);
  }
  return static_cast<int>(methods.size());
}

namespace {

// Clusters the `members` rows of the normalized embeddings into k groups and
// routes `extras` to the closest cluster mean direction. Returns 1-based ids
// indexed like `frames` (the union, in frame order).
std::map<int, int> cluster_frames(const Matrix& emb, const std::vector<int>& members,
                                  const std::vector<int>& extras, int k, Linkage linkage) {
  std::map<int, int> ids;
  if (members.empty()) {
    for (int t : extras) ids[t] = 1;
    return ids;
  }
  Matrix sub(static_cast<Eigen::Index>(members.size()), emb.cols());
  for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = emb.row(members[i]);
  const int k_eff = std::clamp(k, 1, static_cast<int>(members.size()));
  const auto labels = agglomerative_cluster(sub, k_eff, linkage);
  int n_clusters = 0;
  for (int c : labels) n_clusters = std::max(n_clusters, c);
  Matrix centroids = Matrix::Zero(n_clusters, emb.cols());
  for (std::size_t i = 0; i < members.size(); ++i) {
    ids[members[i]] = labels[i];
    centroids.row(labels[i] - 1) += emb.row(members[i]);
  }
  centroids = normalize_rows(centroids);
  for (int t : extras) {
    Eigen::Index best = 0;
    (centroids * emb.row(t).transpose()).maxCoeff(&best);
    ids[t] = static_cast<int>(best) + 1;
  }
  return ids;
}

}  // namespace

DiarizationHypothesis diarize_outputs(const ForwardOutputs& out, const ModelConfig& config,
                                      const InferenceConfig& infer, const std::string& utt_id,
                                      const SpeechMask* mask, std::optional<int> reference_k) {
  infer.validate();
  DiarizationHypothesis hyp;
  hyp.utt_id = utt_id;
  hyp.bona_scores = bona_scores(out);
  const auto T = hyp.bona_scores.size();
  if (mask && mask->size() != T) throw ShapeError("diarize: mask length != frame count");

  int k = 0;
  if (infer.k_override) {
    k = *infer.k_override;
  } else if (infer.oracle_k) {
    if (!reference_k) throw ConfigError("oracle cluster count requested without a reference");
    k = *reference_k;
  } else {
    throw ConfigError("no cluster count: enable oracle_k or set k");
  }

  const Matrix emb = normalize_rows(out.E_prime());
  auto speech = [&](std::size_t t) { return mask == nullptr || (*mask)[t]; };

  ClusterScope scope = infer.scope;
  if (scope == ClusterScope::automatic) {
    scope = config.architecture == Architecture::merged ? ClusterScope::predicted_spoof
                                                        : ClusterScope::all_frames;
  }

  if (scope == ClusterScope::predicted_spoof) {
    std::vector<int> members, extras;
    for (std::size_t t = 0; t < T; ++t) {
      if (hyp.bona_scores[t] >= infer.threshold) continue;
      (speech(t) ? members : extras).push_back(static_cast<int>(t));
    }
    const auto ids = cluster_frames(emb, members, extras, k, infer.linkage);
    std::vector<int> ordered;
    ordered.reserve(ids.size());
    for (const auto& [t, c] : ids) ordered.push_back(c);
    hyp.frame_assignments = apply_lcm(ordered, hyp.bona_scores, infer.threshold);
  } else {
    std::vector<int> members, extras;
    for (std::size_t t = 0; t < T; ++t) (speech(t) ? members : extras).push_back(static_cast<int>(t));
    const auto ids = cluster_frames(emb, members, extras, k + 1, infer.linkage);
    std::vector<int> raw(T, kBonaAssignment);
    std::vector<int> spoof_raw;
    for (std::size_t t = 0; t < T; ++t) {
      if (hyp.bona_scores[t] < infer.threshold) spoof_raw.push_back(ids.at(static_cast<int>(t)));
    }
    const auto renumbered = renumber_by_first_occurrence(spoof_raw);
    hyp.frame_assignments = apply_lcm(renumbered, hyp.bona_scores, infer.threshold);
  }
  return hyp;
}

DiarizationHypothesis diarize_utterance(const ModelParams& params, const ModelConfig& config,
                                        const InferenceConfig& infer, const FeatUtterance& utt,
                                        std::optional<int> reference_k) {
  const auto out = forward(params, config, utt.features);
  return diarize_outputs(out, config, infer, utt.utt_id,
                         utt.speech_mask.empty() ? nullptr : &utt.speech_mask, reference_k);
}

std::vector<std::string> hypothesis_label_names(int max_cluster) {
  std::vector<std::string> names{std::string(kBonaLabel)};
  for (int c = 1; c <= max_cluster; ++c) names.push_back("C" + std::to_string(c));
  return names;
}

Timeline hypothesis_timeline(const DiarizationHypothesis& hyp, double resolution) {
  FrameLabels f;
  f.utt_id = hyp.utt_id;
  f.resolution = resolution;
  f.labels = hyp.frame_assignments;
  return frames_to_timeline(f);
}

}  // namespace spoofdiar
