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
#include <set>

#include "gradcheck.hpp"
#include "spoofdiar/attractor_model.hpp"
#include "spoofdiar/errors.hpp"
#include "spoofdiar/objectives.hpp"

using namespace spoofdiar;
using gradcheck::random_matrix;
using gradcheck::small_config;

TEST_CASE("prototype shapes for d=8, L=4") {
  ModelConfig c = small_config(8, 4);
  c.label_scheme = LabelScheme::spf;
  const auto p = init_model(c, 1);
  CHECK(p.get("O_dia").rows() == 16);
  CHECK(p.get("O_dia").cols() == 4);
  CHECK(p.get("O_token1").rows() == 8);
  CHECK(p.get("O_token1").cols() == 1);
  CHECK(p.get("O_token2").rows() == 8);
  CHECK(p.get("O_token2").cols() == 3);
  CHECK(p.get("attractor_tokens").rows() == 2);

  c.label_scheme = LabelScheme::mul;  // adds the concat column
  CHECK(init_model(c, 1).get("O_dia").cols() == 5);
}

TEST_CASE("forward output shapes") {
  std::mt19937_64 rng(1);
  ModelConfig c = small_config(8, 4);
  const auto p = init_model(c, 3);
  const auto out = forward(p, c, random_matrix(rng, 10, c.d_feat));
  CHECK(out.P_loc().rows() == 10);
  CHECK(out.P_loc().cols() == 2);
  CHECK(out.E_prime().cols() == 16);
  CHECK(out.P_token().rows() == 1);
  CHECK(out.P_token().cols() == 4);
  CHECK(out.branches[0].E.rows() == 12);  // M = T + N

  c.use_attractor_tokens = false;
  const auto plain = forward(init_model(c, 3), c, random_matrix(rng, 10, c.d_feat));
  CHECK(plain.E_prime().cols() == 8);
  CHECK(plain.P_loc().cols() == 2);

  CHECK_THROWS_AS(forward(p, small_config(8, 4), Matrix(0, 5)), ShapeError);
}

TEST_CASE("P_loc rows are stochastic; cosine scores are bounded") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    ModelConfig c = small_config(8, 3);
    c.use_attractor_tokens = trial % 3 != 0;
    c.architecture = trial % 2 ? Architecture::dual_branch : Architecture::merged;
    auto p = init_model(c, static_cast<std::uint64_t>(trial));
    gradcheck::jitter(p, rng, 0.5);
    const auto out = forward(p, c, random_matrix(rng, 1 + trial % 9, c.d_feat, 3.0));
    const Matrix& P = out.P_loc();
    for (Eigen::Index t = 0; t < P.rows(); ++t) {
      CHECK(std::abs(P.row(t).sum() - 1.0) < 1e-6);
      CHECK(P.row(t).minCoeff() >= 0.0);
    }
    CHECK(out.P_dia().cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    if (c.use_attractor_tokens) CHECK(out.P_token().cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("zero loc attention projections give uniform P_loc") {
  std::mt19937_64 rng(4);
  const ModelConfig c = small_config();
  auto p = init_model(c, 1);
  p.get("W_Qs").setZero();
  p.get("W_Ks").setZero();
  const auto out = forward(p, c, random_matrix(rng, 7, c.d_feat));
  CHECK((out.P_loc().array() - 0.5).abs().maxCoeff() == 0.0);
}

TEST_CASE("cross_attention_loc closed forms") {
  const int d = 2;
  Matrix S(1, 2), C(2, 2);
  S << 1, 0;
  C << 1, 0, 0, 1;
  const Matrix I = Matrix::Identity(2, 2);
  // logits = [ln 3, 0]
  const Matrix P = cross_attention_loc(S, C, I * std::log(3.0) * std::sqrt(2.0), I, d);
  CHECK(P(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(P(0, 1) == doctest::Approx(0.25).epsilon(1e-12));

  Matrix same(2, 2);
  same << 0.3, 0.7, 0.3, 0.7;
  const Matrix Q = cross_attention_loc(S, same, I, I, d);
  CHECK(Q(0, 0) == doctest::Approx(0.5));
  CHECK(Q(0, 1) == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  const Matrix S3 = random_matrix(rng, 4, 3), C3 = random_matrix(rng, 2, 3);
  const Matrix Wq = random_matrix(rng, 3, 3), Wk = random_matrix(rng, 3, 3);
  const Matrix a = cross_attention_loc(S3, C3, Wq, Wk, 3);
  const Matrix b = cross_attention_loc(S3 * 7.5, C3, Wq, Wk, 3);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attractor_conditioning closed forms") {
  std::mt19937_64 rng(6);
  const int d = 2;
  Matrix E(1, 2), C(2, 2);
  E << 1, 0;
  C << 1, 0, 0, 1;
  const Matrix I = Matrix::Identity(2, 2);
  const Matrix Wv = random_matrix(rng, 2, 2);
  // logits [1000, 0]: attention is exactly one-hot in double precision.
  const Matrix H = attractor_conditioning(E, C, I * 1000.0 * std::sqrt(2.0), I, Wv, d);
  CHECK(H.row(0) == (C * Wv).row(0));

  const Matrix U = attractor_conditioning(E, C, Matrix::Zero(2, 2), I, Wv, d);
  CHECK((U.row(0) - (C * Wv).colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);

  // Rows of H lie in the span of the two projected token values.
  const Matrix E8 = random_matrix(rng, 9, 6), C8 = random_matrix(rng, 2, 6);
  const Matrix Hr = attractor_conditioning(E8, C8, random_matrix(rng, 6, 6), random_matrix(rng, 6, 6),
                                           random_matrix(rng, 6, 6), 6);
  Matrix stacked(11, 6);
  stacked << (C8 * random_matrix(rng, 6, 6)).eval(), Hr;  // unrelated values: rank grows
  Eigen::JacobiSVD<Matrix> svd_bad(stacked);
  const Matrix Wv8 = random_matrix(rng, 6, 6);
  const Matrix H8 = attractor_conditioning(E8, C8, random_matrix(rng, 6, 6), random_matrix(rng, 6, 6), Wv8, 6);
  Matrix span(11, 6);
  span << (C8 * Wv8).eval(), H8;
  Eigen::JacobiSVD<Matrix> svd(span);
  const auto sv = svd.singularValues();
  CHECK(sv(2) < 1e-10 * sv(0));
  CHECK(svd_bad.singularValues()(2) > 1e-6);
}

TEST_CASE("init and forward are deterministic") {
  std::mt19937_64 rng(7);
  const ModelConfig c = small_config();
  const auto a = init_model(c, 42), b = init_model(c, 42), other = init_model(c, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.tensors()[i].value == b.tensors()[i].value);
    differs = differs || a.tensors()[i].value != other.tensors()[i].value;
  }
  CHECK(differs);
  const Matrix X = random_matrix(rng, 6, c.d_feat);
  CHECK(forward(a, c, X).P_dia() == forward(b, c, X).P_dia());
}

TEST_CASE("layer weights start equal") {
  const ModelConfig c = small_config();
  const auto p = init_model(c, 1);
  const Matrix& w = p.get("layer_weights_frames");
  CHECK(w.size() == c.n_layers);
  const Eigen::RowVectorXd e = w.row(0).array().exp().matrix();
  for (Eigen::Index i = 0; i < e.size(); ++i) CHECK(e(i) / e.sum() == doctest::Approx(1.0 / c.n_layers));
}

TEST_CASE("dual_branch has two disjoint parameter sets") {
  ModelConfig c = small_config();
  c.architecture = Architecture::dual_branch;
  c.use_attractor_tokens = false;
  const auto p = init_model(c, 1);
  std::set<std::string> loc, dia;
  for (const auto& t : p.tensors()) {
    if (t.name.rfind("loc_branch.", 0) == 0) loc.insert(t.name.substr(11));
    else if (t.name.rfind("dia_branch.", 0) == 0) dia.insert(t.name.substr(11));
    else FAIL("unprefixed tensor " << t.name);
  }
  CHECK(loc.count("loc_head.W") == 1);
  CHECK(dia.count("O_dia") == 1);
  CHECK(loc.count("O_dia") == 0);
  CHECK(dia.count("loc_head.W") == 0);
  CHECK(loc.count("input.W") == 1);
  CHECK(dia.count("input.W") == 1);
}

TEST_CASE("validation errors") {
  ModelConfig c = small_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.token_targets = {false, false};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.use_attractor_tokens = false;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("swapping the two tokens with their prototypes and targets keeps the loss") {
  std::mt19937_64 rng(8);
  ModelConfig c = small_config(8, 2);
  auto p = init_model(c, 5);
  p.get("gmlp.0.sgu.spatial").setZero();  // gMLP gate starts position independent
  const Matrix X = random_matrix(rng, 6, c.d_feat);
  const FrameLabels f{"u", 0.02, {0, 0, 1, 1, 0, 1}};
  const auto targets = build_targets(f, nullptr, target_options(c));
  const double base = total_loss(forward(p, c, X), targets, c).total;

  auto q = p;
  q.get("attractor_tokens").row(0) = p.get("attractor_tokens").row(1);
  q.get("attractor_tokens").row(1) = p.get("attractor_tokens").row(0);
  q.get("O_token1") = p.get("O_token2");
  q.get("O_token2") = p.get("O_token1");
  auto swapped = targets;
  swapped.y_loc.col(0) = targets.y_loc.col(1);
  swapped.y_loc.col(1) = targets.y_loc.col(0);
  swapped.y_token(0, 0) = targets.y_token(0, 1);
  swapped.y_token(0, 1) = targets.y_token(0, 0);
  CHECK(total_loss(forward(q, c, X), swapped, c).total == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
  struct Case {
    const char* name;
    Architecture arch;
    bool tokens;
    TokenTargets targets;
    LabelScheme scheme;
    bool loc_loss;
  };
  const Case cases[] = {
      {"merged tokens", Architecture::merged, true, {true, true}, LabelScheme::mul, true},
      {"merged no tokens", Architecture::merged, false, {true, true}, LabelScheme::mul, true},
      {"tokens on dia", Architecture::merged, true, {true, false}, LabelScheme::spf, true},
      {"tokens on loc", Architecture::merged, true, {false, true}, LabelScheme::mul, false},
      {"dual tokens", Architecture::dual_branch, true, {true, true}, LabelScheme::mul, true},
  };
  std::mt19937_64 rng(9);
  for (const auto& k : cases) {
    ModelConfig c = small_config(8, 3);
    c.architecture = k.arch;
    c.use_attractor_tokens = k.tokens;
    c.token_targets = k.targets;
    c.label_scheme = k.scheme;
    c.use_loc_loss = k.loc_loss;
    auto p = init_model(c, 11);
    gradcheck::jitter(p, rng, 0.1);
    const Matrix X = random_matrix(rng, 6, c.d_feat);
    const auto f = gradcheck::random_labels(rng, 6, 3);
    SpeechMask mask{true, true, true, true, true, false};
    const auto targets = build_targets(f, &mask, target_options(c));
    for (const auto& g : gradcheck::check(p, c, X, targets)) {
      INFO(k.name << " / " << g.name << " |a|=" << g.analytic_norm << " |n|=" << g.numeric_norm);
      CHECK(g.rel_error < 1e-4);
    }
  }
}
