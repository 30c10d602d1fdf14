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

// Brute-force reference implementations used only by tests. They favour
// obviously-correct enumeration over speed and share no code with the
// library beyond plain data types.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using FrameSet = std::set<int>;

struct Instance {
  std::vector<int> reference;   // 0 = bona, >0 attack id
  std::vector<int> hypothesis;  // 0 = bona, >0 cluster id
  std::vector<bool> mask;       // true = scored
};

inline FrameSet frames_where(const std::vector<int>& labels, const std::vector<bool>& mask,
                             const std::function<bool(int)>& pred) {
  FrameSet s;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (mask[t] && pred(labels[t])) s.insert(static_cast<int>(t));
  }
  return s;
}

inline std::size_t intersection_size(const FrameSet& a, const FrameSet& b) {
  std::size_t n = 0;
  for (int x : a) n += b.count(x);
  return n;
}

inline std::size_t union_size(const FrameSet& a, const FrameSet& b) {
  FrameSet u = a;
  u.insert(b.begin(), b.end());
  return u.size();
}

/// JI for one utterance; returns false when the union is empty.
inline bool ji_bona(const Instance& in, double* value) {
  const auto R = frames_where(in.reference, in.mask, [](int l) { return l == 0; });
  const auto P = frames_where(in.hypothesis, in.mask, [](int l) { return l == 0; });
  const std::size_t uni = union_size(R, P);
  if (uni == 0) return false;
  // (FA + MD) / TOTAL == |R xor P| / |R u P|
  *value = static_cast<double>(uni - intersection_size(R, P)) / static_cast<double>(uni);
  return true;
}

inline double mean_ji_bona(const std::vector<Instance>& ins) {
  double sum = 0.0;
  int n = 0;
  for (const auto& in : ins) {
    double v = 0.0;
    if (ji_bona(in, &v)) {
      sum += v;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

/// Enumerates every partial one-to-one attack -> cluster map; picks maximum
/// total overlap, then minimum summed Jaccard error. Returns summed error and
/// the number of attacks.
inline std::pair<double, int> jer_sum(const Instance& in) {
  std::set<int> attack_ids, cluster_ids;
  for (std::size_t t = 0; t < in.reference.size(); ++t) {
    if (!in.mask[t]) continue;
    if (in.reference[t] > 0) attack_ids.insert(in.reference[t]);
    if (in.hypothesis[t] > 0) cluster_ids.insert(in.hypothesis[t]);
  }
  std::vector<FrameSet> A, C;
  for (int a : attack_ids) A.push_back(frames_where(in.reference, in.mask, [a](int l) { return l == a; }));
  for (int c : cluster_ids) C.push_back(frames_where(in.hypothesis, in.mask, [c](int l) { return l == c; }));

  std::size_t best_overlap = 0;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<int> choice(A.size(), -1);
  std::vector<bool> used(C.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t a) {
    if (a == A.size()) {
      std::size_t overlap = 0;
      double err = 0.0;
      for (std::size_t i = 0; i < A.size(); ++i) {
        if (choice[i] < 0) {
          err += 1.0;
          continue;
        }
        const auto& c = C[static_cast<std::size_t>(choice[i])];
        const std::size_t inter = intersection_size(A[i], c);
        const std::size_t uni = union_size(A[i], c);
        overlap += inter;
        err += static_cast<double>(uni - inter) / static_cast<double>(uni);
      }
      if (overlap > best_overlap || (overlap == best_overlap && err < best_err)) {
        best_overlap = overlap;
        best_err = err;
      }
      return;
    }
    choice[a] = -1;
    rec(a + 1);
    for (std::size_t c = 0; c < C.size(); ++c) {
      if (used[c]) continue;
      used[c] = true;
      choice[a] = static_cast<int>(c);
      rec(a + 1);
      used[c] = false;
      choice[a] = -1;
    }
  };
  rec(0);
  return {A.empty() ? 0.0 : best_err, static_cast<int>(A.size())};
}

inline double jer_spoof(const std::vector<Instance>& ins) {
  double sum = 0.0;
  int n = 0;
  for (const auto& in : ins) {
    const auto [s, k] = jer_sum(in);
    sum += s;
    n += k;
  }
  return n ? sum / n : 0.0;
}

/// Threshold sweep with direct counting at every distinct score and +inf.
inline double eer(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> th(scores.begin(), scores.end());
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(std::numeric_limits<double>::infinity());
  double P = 0, N = 0;
  for (int l : labels) (l ? P : N) += 1;
  std::vector<double> far, frr;
  for (double t : th) {
    double fa = 0, fr = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] && scores[i] < t) fr += 1;
      if (!labels[i] && scores[i] >= t) fa += 1;
    }
    far.push_back(fa / N);
    frr.push_back(fr / P);
  }
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (frr[i] >= far[i]) {
      if (frr[i] == far[i]) return frr[i];
      // Crossing lies between points i-1 and i: intersect the two segments.
      const double d0 = far[i - 1] - frr[i - 1];
      const double d1 = far[i] - frr[i];
      const double a = d0 / (d0 - d1);
      return far[i - 1] + a * (far[i] - far[i - 1]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

enum class Link { average, complete, single };

/// Naive agglomerative clustering: recompute every cluster-pair linkage from
/// the member sets at every step. Linkages within `tie_tolerance` are ties and
/// go to the pair with the smallest (min member, min member). Labels numbered
/// by first occurrence from 1.
inline std::vector<int> agglomerative(const Eigen::MatrixXd& X, int k, Link link,
                                      double tie_tolerance = 1e-12) {
  const int n = static_cast<int>(X.rows());
  std::vector<Eigen::RowVectorXd> xn;
  for (int i = 0; i < n; ++i) xn.push_back(X.row(i) / std::max(X.row(i).norm(), 1e-12));
  auto d = [&](int i, int j) { return 1.0 - xn[static_cast<std::size_t>(i)].dot(xn[static_cast<std::size_t>(j)]); };
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({i});
  while (static_cast<int>(clusters.size()) > k) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> best_key{n, n};
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = 0; b < clusters.size(); ++b) {
        if (a == b) continue;
        const int ma = *std::min_element(clusters[a].begin(), clusters[a].end());
        const int mb = *std::min_element(clusters[b].begin(), clusters[b].end());
        if (ma > mb) continue;
        double v = link == Link::single ? std::numeric_limits<double>::infinity()
                   : link == Link::complete ? -std::numeric_limits<double>::infinity()
                                            : 0.0;
        for (int i : clusters[a]) {
          for (int j : clusters[b]) {
            const double dij = d(i, j);
            if (link == Link::single) v = std::min(v, dij);
            else if (link == Link::complete) v = std::max(v, dij);
            else v += dij;
          }
        }
        if (link == Link::average) v /= static_cast<double>(clusters[a].size() * clusters[b].size());
        const std::pair<int, int> key{ma, mb};
        const bool tie = std::abs(v - best) <= tie_tolerance;
        if ((v < best && !tie) || (tie && key < best_key)) {
          best = v;
          best_key = key;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::vector<int> raw(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (int i : clusters[c]) raw[static_cast<std::size_t>(i)] = static_cast<int>(c);
  }
  std::map<int, int> first;
  std::vector<int> out;
  for (int r : raw) out.push_back(first.emplace(r, static_cast<int>(first.size()) + 1).first->second);
  return out;
}

/// Maximum total weight over every partial one-to-one row -> column map.
inline double best_assignment_weight(const std::vector<std::vector<double>>& w) {
  const std::size_t R = w.size(), C = R ? w[0].size() : 0;
  double best = 0.0;
  std::vector<bool> used(C, false);
  std::function<void(std::size_t, double)> rec = [&](std::size_t r, double acc) {
    if (r == R) {
      best = std::max(best, acc);
      return;
    }
    rec(r + 1, acc);
    for (std::size_t c = 0; c < C; ++c) {
      if (used[c]) continue;
      used[c] = true;
      rec(r + 1, acc + w[r][c]);
      used[c] = false;
    }
  };
  rec(0, 0.0);
  return best;
}

/// Random scoring instance: T <= 20 frames, <= 3 attacks, <= 5 clusters.
inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> Td(1, 20), nat(0, 3), ncl(0, 5);
  Instance in;
  const int T = Td(rng);
  const int n_attacks = nat(rng);
  const int n_clusters = ncl(rng);
  std::uniform_int_distribution<int> ref_lab(0, n_attacks), hyp_lab(0, n_clusters);
  std::bernoulli_distribution masked(0.1), stick(0.6);
  int r = 0, h = 0;
  for (int t = 0; t < T; ++t) {
    // Runs are more realistic than i.i.d. labels and still cover edge cases.
    if (t == 0 || !stick(rng)) r = ref_lab(rng);
    if (t == 0 || !stick(rng)) h = hyp_lab(rng);
    in.reference.push_back(r);
    in.hypothesis.push_back(h);
    in.mask.push_back(!masked(rng));
  }
  return in;
}

}  // namespace oracle
