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

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/metrics.hpp"

using namespace spoofdiar;

namespace {

FrameLabels ref_of(const std::vector<int>& labels) { return FrameLabels{"u", 0.02, labels}; }

UttScore score(const oracle::Instance& in) {
  return score_utterance(ref_of(in.reference), in.hypothesis, &in.mask);
}

}  // namespace

TEST_CASE("JI_bona worked example: FA=2, MD=2, TOTAL=7") {
  // ref bona {0..4}, predicted bona {0,1,2,5,6}
  std::vector<int> ref{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  std::vector<int> hyp{0, 0, 0, 1, 1, 0, 0, 1, 1, 1};
  const auto s = score_utterance(ref_of(ref), hyp, nullptr);
  CHECK(s.fa_bona == 2);
  CHECK(s.md_bona == 2);
  CHECK(s.total_bona == 7);
  CHECK(s.ji_bona() == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("perfect hypotheses score zero; all-miss bona scores one") {
  std::vector<int> ref{0, 0, 2, 2, 3, 3, 0};
  std::vector<int> renamed{0, 0, 7, 7, 1, 1, 0};
  const auto s = score_utterance(ref_of(ref), renamed, nullptr);
  CHECK(s.ji_bona() == 0.0);
  CHECK(s.jer_sum() == 0.0);

  std::vector<int> all_spoof{1, 1, 1, 1, 1, 1, 1};
  CHECK(score_utterance(ref_of(ref), all_spoof, nullptr).ji_bona() == 1.0);
}

TEST_CASE("an entirely unpredicted attack contributes 1") {
  std::vector<int> ref{0, 1, 1, 2, 2};
  std::vector<int> hyp{0, 1, 1, 0, 0};
  const auto s = score_utterance(ref_of(ref), hyp, nullptr);
  REQUIRE(s.attacks.size() == 2);
  CHECK(s.attacks[0].error() == 0.0);
  CHECK(s.attacks[1].error() == 1.0);
  CHECK(s.attacks[1].mapped_cluster == -1);
  const std::vector<UttScore> v{s};
  CHECK(jer_spoof(v) == doctest::Approx(0.5));
}

TEST_CASE("mapping example {(c1,A1):5,(c1,A2):1,(c2,A2):4}") {
  std::vector<int> ref, hyp;
  auto add = [&](int r, int h, int n) {
    for (int i = 0; i < n; ++i) {
      ref.push_back(r);
      hyp.push_back(h);
    }
  };
  add(1, 1, 5);
  add(2, 1, 1);
  add(2, 2, 4);
  const auto m = map_clusters(ref_of(ref), hyp, nullptr);
  CHECK(m == std::map<int, int>{{1, 1}, {2, 2}});
}

TEST_CASE("mapping recovers a renaming") {
  std::vector<int> ref{1, 1, 2, 2, 3, 3, 0};
  std::vector<int> hyp{3, 3, 1, 1, 2, 2, 0};
  CHECK(map_clusters(ref_of(ref), hyp, nullptr) == std::map<int, int>{{3, 1}, {1, 2}, {2, 3}});
}

TEST_CASE("length mismatch is an error") {
  CHECK_THROWS_AS(score_utterance(ref_of({0, 1}), std::vector<int>{0}, nullptr), ShapeError);
}

TEST_CASE("masked frames are not scored") {
  std::vector<int> ref{0, 1, 1};
  std::vector<int> hyp{1, 1, 1};
  SpeechMask mask{false, true, true};
  const auto s = score_utterance(ref_of(ref), hyp, &mask);
  CHECK(s.total_bona == 0);
  CHECK(s.jer_sum() == 0.0);
  int skipped = 0;
  const std::vector<UttScore> v{s};
  CHECK(ji_bona(v, &skipped) == 0.0);
  CHECK(skipped == 1);
}

TEST_CASE("optimal assignment equals brute force on random matrices") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dim(1, 5), val(0, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int R = dim(rng), C = dim(rng);
    std::vector<std::vector<double>> w(R, std::vector<double>(C));
    for (auto& row : w)
      for (auto& x : row) x = val(rng);
    const auto match = optimal_assignment(w);
    double total = 0.0;
    std::set<int> cols;
    for (int r = 0; r < R; ++r) {
      if (match[r] < 0) continue;
      CHECK(cols.insert(match[r]).second);
      total += w[r][match[r]];
    }
    CHECK(total == oracle::best_assignment_weight(w));
  }
}

TEST_CASE("mapping objective equals brute force over all permutations") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const auto in = oracle::random_instance(rng);
    const auto m = map_clusters(ref_of(in.reference), in.hypothesis, &in.mask);
    // Overlap of the returned mapping vs the exhaustive maximum.
    std::size_t overlap = 0;
    for (std::size_t t = 0; t < in.reference.size(); ++t) {
      if (!in.mask[t] || in.hypothesis[t] == 0) continue;
      auto it = m.find(in.hypothesis[t]);
      if (it != m.end() && it->second == in.reference[t]) ++overlap;
    }
    std::set<int> A, C;
    for (std::size_t t = 0; t < in.reference.size(); ++t) {
      if (!in.mask[t]) continue;
      if (in.reference[t]) A.insert(in.reference[t]);
      if (in.hypothesis[t]) C.insert(in.hypothesis[t]);
    }
    std::vector<std::vector<double>> w(C.size(), std::vector<double>(A.size(), 0.0));
    std::vector<int> cv(C.begin(), C.end()), av(A.begin(), A.end());
    for (std::size_t t = 0; t < in.reference.size(); ++t) {
      if (!in.mask[t] || !in.reference[t] || !in.hypothesis[t]) continue;
      const auto ci = std::lower_bound(cv.begin(), cv.end(), in.hypothesis[t]) - cv.begin();
      const auto ai = std::lower_bound(av.begin(), av.end(), in.reference[t]) - av.begin();
      w[ci][ai] += 1.0;
    }
    CHECK(static_cast<double>(overlap) == oracle::best_assignment_weight(w));
  }
}

TEST_CASE("JI_bona and JER_spoof equal the frame-set oracles") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Instance> ins;
    std::vector<UttScore> scores;
    const int n = 1 + trial % 5;
    for (int i = 0; i < n; ++i) {
      ins.push_back(oracle::random_instance(rng));
      scores.push_back(score(ins.back()));
    }
    CHECK(std::abs(ji_bona(scores) - oracle::mean_ji_bona(ins)) <= 1e-12);
    CHECK(std::abs(jer_spoof(scores) - oracle::jer_spoof(ins)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant to cluster renaming") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = oracle::random_instance(rng);
    const auto before = score(in);
    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    for (auto& h : in.hypothesis) h = perm[static_cast<std::size_t>(h)];
    const auto after = score(in);
    CHECK(after.ji_bona() == before.ji_bona());
    CHECK(std::abs(after.jer_sum() - before.jer_sum()) <= 1e-12);
  }
}

TEST_CASE("JER never improves when a correct frame is corrupted") {
  // "Correct" is relative to the mapping of the unperturbed hypothesis, which
  // is held fixed; re-optimizing the mapping after the flip can pick a tied
  // assignment whose error drops.
  std::mt19937_64 rng(37);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto in = oracle::random_instance(rng);
    const auto ref = ref_of(in.reference);
    const auto m = map_clusters(ref, in.hypothesis, &in.mask);
    const double before = score_utterance(ref, in.hypothesis, &in.mask, m).jer_sum();
    for (std::size_t t = 0; t < in.hypothesis.size(); ++t) {
      const int h = in.hypothesis[t];
      if (!in.mask[t] || h == 0) continue;
      const auto it = m.find(h);
      if (it == m.end() || it->second != in.reference[t]) continue;
      for (int wrong : {0, 9}) {  // to bona, or to an unmapped cluster
        auto worse = in.hypothesis;
        worse[t] = wrong;
        const double after = score_utterance(ref, worse, &in.mask, m).jer_sum();
        CHECK(after > before);
      }
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("EER examples") {
  CHECK(eer(std::vector<double>{0.9, 0.4, 0.6, 0.1}, std::vector<int>{1, 1, 0, 0}) ==
        doctest::Approx(0.5));
  CHECK(eer(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 0.0);
  CHECK(eer(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK_THROWS_AS(eer(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
}

TEST_CASE("EER equals the threshold-sweep oracle and ignores monotone transforms") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> nd(2, 20), coarse(0, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = nd(rng);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < n; ++i) {
      // Coarse scores produce ties on some trials.
      s.push_back(trial % 2 ? coarse(rng) / 6.0 : u(rng));
      l.push_back(i == 0 ? 1 : i == 1 ? 0 : static_cast<int>(u(rng) < 0.5));
    }
    const double e = eer(s, l);
    CHECK(std::abs(e - oracle::eer(s, l)) <= 1e-12);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    std::vector<double> t;
    for (double x : s) t.push_back(std::exp(3.0 * x) - 7.0);
    CHECK(std::abs(eer(t, l) - e) <= 1e-12);
  }
}

TEST_CASE("utterance pooling") {
  std::vector<double> s{0.9, 0.2, 0.7};
  CHECK(pool_utterance_score(s, nullptr, UttPooling::min) == 0.2);
  CHECK(pool_utterance_score(s, nullptr, UttPooling::mean) == doctest::Approx(0.6));
  SpeechMask m{true, false, true};
  CHECK(pool_utterance_score(s, &m, UttPooling::min) == 0.7);
}

TEST_CASE("score_corpus aggregates") {
  FrameLabels r1 = ref_of({0, 0, 1, 1});
  FrameLabels r2 = ref_of({0, 2, 2, 0});
  std::vector<int> h1{0, 0, 1, 1}, h2{0, 0, 0, 0};
  std::vector<ScoredUtterance> u{{&r1, &h1, nullptr}, {&r2, &h2, nullptr}};
  const auto rep = score_corpus(u);
  CHECK(rep.n_utts == 2);
  CHECK(rep.n_attacks == 2);
  CHECK(rep.jer_spoof == doctest::Approx(0.5));
  CHECK(rep.ji_bona == doctest::Approx((0.0 + 0.5) / 2.0));
}
