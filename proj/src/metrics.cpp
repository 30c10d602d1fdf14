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

#include "spoofdiar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "spoofdiar/errors.hpp"

namespace spoofdiar {

double UttScore::jer_sum() const {
  double s = 0.0;
  for (const auto& a : attacks) s += a.error();
  return s;
}

std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& weight,
                                    const std::vector<std::vector<double>>* tiebreak) {
  const std::size_t rows = weight.size();
  if (rows == 0) return {};
  const std::size_t cols = weight[0].size();
  if (cols == 0) return std::vector<int>(rows, -1);
  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows;  // n <= m
  const std::size_t m = transpose ? rows : cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    const std::size_t r = transpose ? j : i;
    const std::size_t c = transpose ? i : j;
    double v = -weight[r][c];
    if (tiebreak) v += (*tiebreak)[r][c];
    return v;
  };

  // Shortest augmenting path Hungarian method, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t i = p[j] - 1;
    if (transpose) {
      out[j - 1] = static_cast<int>(i);
    } else {
      out[i] = static_cast<int>(j - 1);
    }
  }
  return out;
}

namespace {

struct OverlapTable {
  std::vector<int> clusters;  // hypothesis cluster ids (>= 1)
  std::vector<int> attacks;   // reference spoof classes (>= 1)
  std::vector<int> cluster_size;
  std::vector<int> attack_size;
  std::vector<std::vector<int>> overlap;  // clusters x attacks
};

void check_lengths(const FrameLabels& reference, std::span<const int> hypothesis,
                   const SpeechMask* mask) {
  if (reference.labels.size() != hypothesis.size()) {
    throw ShapeError("'" + reference.utt_id + "': reference has " +
                     std::to_string(reference.labels.size()) + " frames, hypothesis " +
                     std::to_string(hypothesis.size()));
  }
  if (mask && mask->size() != hypothesis.size()) {
    throw ShapeError("'" + reference.utt_id + "': mask length mismatch");
  }
}

OverlapTable overlap_table(const FrameLabels& reference, std::span<const int> hypothesis,
                           const SpeechMask* mask) {
  check_lengths(reference, hypothesis, mask);
  std::set<int> clusters, attacks;
  for (std::size_t t = 0; t < hypothesis.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    if (hypothesis[t] != 0) clusters.insert(hypothesis[t]);
    if (reference.labels[t] != 0) attacks.insert(reference.labels[t]);
  }
  OverlapTable tab;
  tab.clusters.assign(clusters.begin(), clusters.end());
  tab.attacks.assign(attacks.begin(), attacks.end());
  tab.cluster_size.assign(tab.clusters.size(), 0);
  tab.attack_size.assign(tab.attacks.size(), 0);
  tab.overlap.assign(tab.clusters.size(), std::vector<int>(tab.attacks.size(), 0));
  auto index_of = [](const std::vector<int>& v, int x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  for (std::size_t t = 0; t < hypothesis.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    const bool h = hypothesis[t] != 0;
    const bool r = reference.labels[t] != 0;
    std::size_t ci = 0, ai = 0;
    if (h) ++tab.cluster_size[ci = index_of(tab.clusters, hypothesis[t])];
    if (r) ++tab.attack_size[ai = index_of(tab.attacks, reference.labels[t])];
    if (h && r) ++tab.overlap[ci][ai];
  }
  return tab;
}

std::vector<int> assign(const OverlapTable& tab) {
  const std::size_t C = tab.clusters.size(), A = tab.attacks.size();
  std::vector<std::vector<double>> weight(C, std::vector<double>(A, 0.0));
  std::vector<std::vector<double>> tie(C, std::vector<double>(A, 0.0));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t a = 0; a < A; ++a) {
      const int ov = tab.overlap[c][a];
      const int uni = tab.cluster_size[c] + tab.attack_size[a] - ov;
      weight[c][a] = ov;
      tie[c][a] = (1.0 - static_cast<double>(ov) / uni) / static_cast<double>(A + 1);
    }
  }
  auto match = optimal_assignment(weight, &tie);
  for (std::size_t c = 0; c < C; ++c) {
    if (match[c] >= 0 && tab.overlap[c][static_cast<std::size_t>(match[c])] == 0) match[c] = -1;
  }
  return match;
}

}  // namespace

std::map<int, int> map_clusters(const FrameLabels& reference, std::span<const int> hypothesis,
                                const SpeechMask* mask) {
  const auto tab = overlap_table(reference, hypothesis, mask);
  const auto match = assign(tab);
  std::map<int, int> out;
  for (std::size_t c = 0; c < match.size(); ++c) {
    if (match[c] >= 0) out[tab.clusters[c]] = tab.attacks[static_cast<std::size_t>(match[c])];
  }
  return out;
}

UttScore score_utterance(const FrameLabels& reference, std::span<const int> hypothesis,
                         const SpeechMask* mask) {
  return score_utterance(reference, hypothesis, mask, map_clusters(reference, hypothesis, mask));
}

UttScore score_utterance(const FrameLabels& reference, std::span<const int> hypothesis,
                         const SpeechMask* mask, const std::map<int, int>& mapping) {
  const auto tab = overlap_table(reference, hypothesis, mask);
  UttScore s;
  s.utt_id = reference.utt_id;
  for (std::size_t t = 0; t < hypothesis.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    const bool ref_bona = reference.labels[t] == 0;
    const bool hyp_bona = hypothesis[t] == 0;
    if (hyp_bona && !ref_bona) ++s.fa_bona;
    if (ref_bona && !hyp_bona) ++s.md_bona;
    if (ref_bona || hyp_bona) ++s.total_bona;
  }
  std::vector<int> cluster_for_attack(tab.attacks.size(), -1);
  for (std::size_t c = 0; c < tab.clusters.size(); ++c) {
    const auto it = mapping.find(tab.clusters[c]);
    if (it == mapping.end()) continue;
    const auto a = std::lower_bound(tab.attacks.begin(), tab.attacks.end(), it->second);
    if (a == tab.attacks.end() || *a != it->second) continue;
    auto& slot = cluster_for_attack[static_cast<std::size_t>(a - tab.attacks.begin())];
    if (slot >= 0) throw ValidationError("cluster mapping is not one-to-one");
    slot = static_cast<int>(c);
  }
  for (std::size_t a = 0; a < tab.attacks.size(); ++a) {
    AttackScore as;
    as.attack = tab.attacks[a];
    const int c = cluster_for_attack[a];
    if (c < 0) {
      as.md = tab.attack_size[a];
      as.total = tab.attack_size[a];
    } else {
      const auto ci = static_cast<std::size_t>(c);
      const int ov = tab.overlap[ci][a];
      as.mapped_cluster = tab.clusters[ci];
      as.fa = tab.cluster_size[ci] - ov;
      as.md = tab.attack_size[a] - ov;
      as.total = tab.cluster_size[ci] + tab.attack_size[a] - ov;
    }
    s.attacks.push_back(as);
  }
  return s;
}

double ji_bona(std::span<const UttScore> scores, int* skipped) {
  double sum = 0.0;
  int n = 0, skip = 0;
  for (const auto& s : scores) {
    if (s.total_bona == 0) {
      ++skip;
      continue;
    }
    sum += s.ji_bona();
    ++n;
  }
  if (skipped) *skipped = skip;
  return n > 0 ? sum / n : 0.0;
}

double jer_spoof(std::span<const UttScore> scores) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    sum += s.jer_sum();
    n += s.attacks.size();
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

DiarizationReport score_corpus(std::span<const ScoredUtterance> utts) {
  DiarizationReport r;
  for (const auto& u : utts) {
    r.utts.push_back(score_utterance(*u.reference, *u.hypothesis, u.mask));
    r.n_attacks += static_cast<int>(r.utts.back().attacks.size());
  }
  r.n_utts = static_cast<int>(r.utts.size());
  r.ji_bona = ji_bona(r.utts, &r.n_ji_skipped);
  r.jer_spoof = jer_spoof(r.utts);
  return r;
}

double eer(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("eer: scores / labels length mismatch");
  std::vector<std::pair<double, int>> items;
  items.reserve(scores.size());
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    items.emplace_back(scores[i], labels[i] != 0);
    n_pos += labels[i] != 0;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("eer: undefined with a single class");
  std::sort(items.begin(), items.end());

  // Threshold at each distinct score (accept score >= threshold), then +inf.
  // FRR rises and FAR falls along the sweep.
  double prev_far = 1.0, prev_frr = 0.0;
  std::size_t pos_below = 0, neg_below = 0;
  std::size_t i = 0;
  while (true) {
    double far, frr;
    if (i < items.size()) {
      far = static_cast<double>(n_neg - neg_below) / static_cast<double>(n_neg);
      frr = static_cast<double>(pos_below) / static_cast<double>(n_pos);
    } else {
      far = 0.0;
      frr = 1.0;
    }
    if (frr >= far) {
      if (frr == far) return frr;
      const double d0 = prev_far - prev_frr;
      const double d1 = far - frr;
      const double t = d0 / (d0 - d1);
      return prev_far + t * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
    if (i >= items.size()) break;
    const double s = items[i].first;
    while (i < items.size() && items[i].first == s) {
      (items[i].second ? pos_below : neg_below)++;
      ++i;
    }
  }
  return 0.0;  // unreachable: the +inf point always has frr >= far
}

double pool_utterance_score(std::span<const double> frame_scores, const SpeechMask* mask,
                            UttPooling pooling) {
  double acc = pooling == UttPooling::min ? std::numeric_limits<double>::infinity() : 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < frame_scores.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    acc = pooling == UttPooling::min ? std::min(acc, frame_scores[t]) : acc + frame_scores[t];
    ++n;
  }
  if (n == 0) throw Error("pool_utterance_score: no speech frames");
  return pooling == UttPooling::min ? acc : acc / static_cast<double>(n);
}

}  // namespace spoofdiar
