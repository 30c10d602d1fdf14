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
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/objectives.hpp"

using namespace spoofdiar;
using gradcheck::random_matrix;

TEST_CASE("cosine prototype scores") {
  Matrix x(1, 2), o(2, 1);
  x << 1, 0;
  o << 0.96, 0.28;
  CHECK(cosine_prototype_scores(x, o)(0, 0) == doctest::Approx(0.96).epsilon(1e-12));

  std::mt19937_64 rng(1);
  const Matrix v = random_matrix(rng, 1, 5);
  CHECK(cosine_prototype_scores(v, v.transpose())(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix a(1, 2), b(2, 1);
  a << 0, 3;
  b << 2, 0;
  CHECK(cosine_prototype_scores(a, b)(0, 0) == 0.0);

  const Matrix zero = Matrix::Zero(1, 5);
  const Matrix s = cosine_prototype_scores(zero, v.transpose());
  CHECK(std::isfinite(s(0, 0)));
  CHECK(s(0, 0) == 0.0);

  // Scale invariance in both arguments.
  const Matrix X = random_matrix(rng, 4, 5), O = random_matrix(rng, 5, 3);
  CHECK((cosine_prototype_scores(X, O) - cosine_prototype_scores(X * 3.0, O * 0.2)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("p2sgrad examples and properties") {
  Matrix P(1, 2);
  P << 0.8, 0.2;
  const std::vector<int> lab{0};
  CHECK(p2sgrad_loss(P, lab) == doctest::Approx(0.08).epsilon(1e-12));
  Matrix Y(1, 2);
  Y << 1, 0;
  CHECK(p2sgrad_loss(P, Y) == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(p2sgrad_loss(Y, Y) == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix A = Matrix::NullaryExpr(5, 3, [&] { return u(rng); });
    Matrix B = Matrix::NullaryExpr(5, 3, [&] { return u(rng); });
    CHECK(p2sgrad_loss(A, B) >= 0.0);
    CHECK(p2sgrad_loss(A, A) == 0.0);
  }

  ad::ColVector w(3);
  w << 1, 0, 1;
  Matrix Q(3, 1), Z(3, 1);
  Q << 1, 100, 3;
  Z << 0, 0, 0;
  CHECK(p2sgrad_loss(Q, Z, w) == doctest::Approx(5.0));
  CHECK(p2sgrad_loss(Q, Z, ad::ColVector::Zero(3)) == 0.0);
}

TEST_CASE("build_targets under Mul and Spf") {
  const FrameLabels f{"u", 0.02, {0, 0, 1, 1, 2, 0}};
  TargetOptions mul{LabelScheme::mul, 3, false};
  const auto t = build_targets(f, nullptr, mul);
  CHECK(t.y_dia.cols() == 4);
  // Frames 1,2 and 4,5 sit on bona/spoof boundaries.
  const Matrix expected_dia = (Matrix(6, 4) << 1, 0, 0, 0,  //
                               0, 0, 0, 1,                  //
                               0, 0, 0, 1,                  //
                               0, 1, 0, 0,                  //
                               0, 0, 0, 1,                  //
                               0, 0, 0, 1)
                                  .finished();
  CHECK(t.y_dia == expected_dia);
  CHECK(t.y_token == (Matrix(1, 3) << 1, 1, 1).finished());
  CHECK(t.y_loc.col(0) == (Matrix(6, 1) << 1, 1, 0, 0, 0, 1).finished());
  CHECK(t.w_dia == ad::ColVector::Ones(6));

  TargetOptions spf{LabelScheme::spf, 3, false};
  const auto s = build_targets(f, nullptr, spf);
  CHECK(s.y_dia.cols() == 3);
  CHECK(s.w_dia == (ad::ColVector(6) << 0, 0, 0, 1, 0, 0).finished());

  SpeechMask mask{true, false, true, true, true, true};
  const auto m = build_targets(f, &mask, mul);
  CHECK(m.w_loc(1) == 0.0);
  CHECK(m.w_dia(1) == 0.0);
  mul.include_masked = true;
  CHECK(build_targets(f, &mask, mul).w_loc(1) == 1.0);

  const FrameLabels bad{"u", 0.02, {0, 3}};
  CHECK_THROWS_AS(build_targets(bad, nullptr, spf), VocabularyError);
  SpeechMask shorter{true};
  CHECK_THROWS_AS(build_targets(f, &shorter, spf), ShapeError);
}

namespace {

struct Fixture {
  ModelConfig config = gradcheck::small_config(8, 3);
  ModelParams params;
  Matrix X;
  FrameLabels labels;

  explicit Fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params = init_model(config, seed);
    X = random_matrix(rng, 7, config.d_feat);
    labels = gradcheck::random_labels(rng, 7, 3);
  }
};

}  // namespace

TEST_CASE("total loss is a sum of non-negative terms; disabled terms are zero") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fixture fx(seed);
    const auto targets = build_targets(fx.labels, nullptr, target_options(fx.config));
    const auto l = total_loss(forward(fx.params, fx.config, fx.X), targets, fx.config);
    CHECK(l.loss_loc >= 0.0);
    CHECK(l.loss_dia >= 0.0);
    CHECK(l.loss_token >= 0.0);
    CHECK(l.total == l.loss_loc + l.loss_dia + l.loss_token);

    ModelConfig off = fx.config;
    off.use_attractor_tokens = false;
    off.use_loc_loss = false;
    const auto p = init_model(off, seed);
    const auto z = total_loss(forward(p, off, fx.X), targets, off);
    CHECK(z.loss_loc == 0.0);
    CHECK(z.loss_token == 0.0);
    CHECK(z.total == z.loss_dia);
  }
}

TEST_CASE("graph and value losses agree") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Fixture fx(seed);
    if (seed % 2) fx.config.architecture = Architecture::dual_branch;
    fx.params = init_model(fx.config, seed);
    const auto targets = build_targets(fx.labels, nullptr, target_options(fx.config));
    ad::Tape tape;
    const auto bound = bind(tape, fx.params, false);
    const auto g = total_loss_graph(forward_graph(bound, fx.config, tape.constant(fx.X)), targets,
                                    fx.config, LossNormalizers::of(targets));
    const auto v = total_loss(forward(fx.params, fx.config, fx.X), targets, fx.config);
    CHECK(g.values().total == doctest::Approx(v.total).epsilon(1e-12));
    CHECK(g.values().loss_token == doctest::Approx(v.loss_token).epsilon(1e-12));
  }
}

TEST_CASE("zero-weight frames do not affect the loss") {
  Fixture fx(3);
  SpeechMask mask(7, true);
  mask[2] = false;
  const auto targets = build_targets(fx.labels, &mask, target_options(fx.config));
  const auto out = forward(fx.params, fx.config, fx.X);
  const auto base = total_loss(out, targets, fx.config);
  auto moved = out;
  for (auto& b : moved.branches) {
    b.P_loc.row(2).setConstant(0.5);
    b.P_dia.row(2).setConstant(-0.9);
  }
  const auto l = total_loss(moved, targets, fx.config);
  CHECK(l.loss_loc == base.loss_loc);
  CHECK(l.loss_dia == base.loss_dia);
}

TEST_CASE("frame losses are invariant to a frame permutation applied to outputs and targets") {
  Fixture fx(4);
  const auto targets = build_targets(fx.labels, nullptr, target_options(fx.config));
  const auto out = forward(fx.params, fx.config, fx.X);
  const auto base = total_loss(out, targets, fx.config);
  std::vector<int> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Eigen::PermutationMatrix<Eigen::Dynamic> P(Eigen::Map<Eigen::VectorXi>(perm.data(), 7));
  auto po = out;
  for (auto& b : po.branches) {
    b.P_loc = P * b.P_loc;
    b.P_dia = P * b.P_dia;
  }
  auto pt = targets;
  pt.y_loc = P * targets.y_loc;
  pt.y_dia = P * targets.y_dia;
  pt.w_loc = P * targets.w_loc;
  pt.w_dia = P * targets.w_dia;
  const auto l = total_loss(po, pt, fx.config);
  CHECK(l.total == doctest::Approx(base.total).epsilon(1e-14));
  CHECK(l.loss_token == base.loss_token);
}

TEST_CASE("rescaling the prototypes leaves the loss unchanged") {
  Fixture fx(6);
  const auto targets = build_targets(fx.labels, nullptr, target_options(fx.config));
  const double base = total_loss(forward(fx.params, fx.config, fx.X), targets, fx.config).total;
  auto p = fx.params;
  p.get("O_dia") *= 4.0;
  p.get("O_token1") *= 0.3;
  p.get("O_token2") *= 7.0;
  CHECK(total_loss(forward(p, fx.config, fx.X), targets, fx.config).total ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("non-finite outputs raise DivergenceError") {
  Fixture fx(7);
  const auto targets = build_targets(fx.labels, nullptr, target_options(fx.config));
  auto out = forward(fx.params, fx.config, fx.X);
  out.branches[0].P_dia(0, 0) = std::nan("");
  CHECK_THROWS_AS(total_loss(out, targets, fx.config), DivergenceError);
}
