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

#include "spoofdiar/objectives.hpp"

#include <cmath>
#include <sstream>

#include "spoofdiar/errors.hpp"
#include "spoofdiar/synthetic_corpus.hpp"

namespace spoofdiar {

ad::Var cosine_prototype_scores(ad::Var X, ad::Var O) {
  if (X.cols() != O.rows()) {
    throw ShapeError("cosine_prototype_scores: embedding width " + std::to_string(X.cols()) +
                     " != prototype height " + std::to_string(O.rows()));
  }
  return ad::matmul(ad::l2_normalize_rows(X, kNormEpsilon), ad::l2_normalize_cols(O, kNormEpsilon));
}

Matrix cosine_prototype_scores(const Matrix& X, const Matrix& O) {
  if (X.cols() != O.rows()) throw ShapeError("cosine_prototype_scores: shape mismatch");
  Matrix xn = X;
  for (Eigen::Index r = 0; r < xn.rows(); ++r) xn.row(r) /= std::max(X.row(r).norm(), kNormEpsilon);
  Matrix on = O;
  for (Eigen::Index c = 0; c < on.cols(); ++c) on.col(c) /= std::max(O.col(c).norm(), kNormEpsilon);
  return xn * on;
}

double p2sgrad_loss(const Matrix& P, const Matrix& Y) {
  return p2sgrad_loss(P, Y, ad::ColVector::Ones(P.rows()));
}

double p2sgrad_loss(const Matrix& P, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != P.rows()) {
    throw ShapeError("p2sgrad_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(P.rows()) + " rows");
  }
  Matrix Y = Matrix::Zero(P.rows(), P.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= P.cols()) throw ShapeError("p2sgrad_loss: label out of range");
    Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return p2sgrad_loss(P, Y);
}

double p2sgrad_loss(const Matrix& P, const Matrix& Y, const ad::ColVector& weights) {
  if (P.rows() != Y.rows() || P.cols() != Y.cols() || weights.size() != P.rows()) {
    throw ShapeError("p2sgrad_loss: shape mismatch");
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (weights(i) == 0.0) continue;
    double row = 0.0;
    for (Eigen::Index k = 0; k < P.cols(); ++k) {
      const double diff = P(i, k) - Y(i, k);
      row += diff * diff;
    }
    num += weights(i) * row;
    den += weights(i);
  }
  return den > 0.0 ? num / den : 0.0;
}

TargetOptions target_options(const ModelConfig& config, bool include_masked) {
  return TargetOptions{config.label_scheme, config.num_classes, include_masked};
}

Targets build_targets(const FrameLabels& frames, const SpeechMask* mask,
                      const TargetOptions& options) {
  const auto T = static_cast<Eigen::Index>(frames.labels.size());
  if (mask && static_cast<Eigen::Index>(mask->size()) != T) {
    throw ShapeError("build_targets: mask length != frame count");
  }
  const int L = options.num_classes;
  const bool mul = options.scheme == LabelScheme::mul;
  const int dia_classes = mul ? L + 1 : L;
  const auto concat = concat_frames(frames);

  Targets t;
  t.y_loc = Matrix::Zero(T, 2);
  t.w_loc = ad::ColVector::Ones(T);
  t.y_dia = Matrix::Zero(T, dia_classes);
  t.w_dia = ad::ColVector::Ones(T);
  t.y_token = Matrix::Zero(1, L);
  for (Eigen::Index i = 0; i < T; ++i) {
    const int c = frames.labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= L) {
      throw VocabularyError("frame label " + std::to_string(c) + " of '" + frames.utt_id +
                            "' is outside the " + std::to_string(L) + " model classes");
    }
    const bool bona = c == 0;
    t.y_loc(i, bona ? 0 : 1) = 1.0;
    t.y_token(0, c) = 1.0;
    if (mul && concat[static_cast<std::size_t>(i)]) {
      t.y_dia(i, L) = 1.0;
    } else {
      t.y_dia(i, c) = 1.0;
    }
    if (!mul && (bona || concat[static_cast<std::size_t>(i)])) t.w_dia(i) = 0.0;
    if (mask && !options.include_masked && !(*mask)[static_cast<std::size_t>(i)]) {
      t.w_loc(i) = 0.0;
      t.w_dia(i) = 0.0;
    }
  }
  return t;
}

LossNormalizers LossNormalizers::of(const Targets& targets) {
  return LossNormalizers{targets.w_loc.sum(), targets.w_dia.sum(), 1.0};
}

LossNormalizers& LossNormalizers::operator+=(const LossNormalizers& other) {
  loc_weight += other.loc_weight;
  dia_weight += other.dia_weight;
  utterances += other.utterances;
  return *this;
}

LossBreakdown LossGraph::values() const {
  return LossBreakdown{loss_loc.scalar(), loss_dia.scalar(), loss_token.scalar(), total.scalar()};
}

namespace {

ad::Var zero_scalar(ad::Tape& tape) { return tape.constant(Matrix::Zero(1, 1)); }

ad::Var normalized(ad::Var sum, double denominator) {
  return denominator > 0.0 ? ad::scale(sum, 1.0 / denominator) : ad::scale(sum, 0.0);
}

void check_targets(const Targets& targets, Eigen::Index T) {
  if (targets.num_frames() != T) {
    throw ShapeError("targets have " + std::to_string(targets.num_frames()) +
                     " frames, outputs " + std::to_string(T));
  }
}

}  // namespace

LossGraph total_loss_graph(const ForwardGraph& graph, const Targets& targets,
                           const ModelConfig& config, const LossNormalizers& norm) {
  ad::Tape& tape = *graph.branches.at(0).E.tape();
  LossGraph out;
  out.loss_loc = zero_scalar(tape);
  out.loss_dia = zero_scalar(tape);
  out.loss_token = zero_scalar(tape);
  for (const auto& b : graph.branches) {
    if (b.emits_loc && config.use_loc_loss) {
      check_targets(targets, b.P_loc.rows());
      out.loss_loc = ad::add(out.loss_loc,
                             normalized(ad::weighted_squared_error(b.P_loc, targets.y_loc, targets.w_loc),
                                        norm.loc_weight));
    }
    if (b.emits_dia) {
      check_targets(targets, b.P_dia.rows());
      out.loss_dia = ad::add(out.loss_dia,
                             normalized(ad::weighted_squared_error(b.P_dia, targets.y_dia, targets.w_dia),
                                        norm.dia_weight));
    }
    if (b.has_tokens) {
      out.loss_token = ad::add(
          out.loss_token,
          normalized(ad::weighted_squared_error(b.P_token, targets.y_token, ad::ColVector::Ones(1)),
                     norm.utterances));
    }
  }
  out.total = ad::add(ad::add(out.loss_loc, out.loss_dia), out.loss_token);
  return out;
}

LossBreakdown total_loss(const ForwardOutputs& out, const Targets& targets,
                         const ModelConfig& config) {
  LossBreakdown loss;
  for (std::size_t i = 0; i < out.branches.size(); ++i) {
    const auto& b = out.branches[i];
    const bool emits_loc = static_cast<int>(i) == out.loc_branch;
    const bool emits_dia = static_cast<int>(i) == out.dia_branch;
    if (emits_loc && config.use_loc_loss) loss.loss_loc += p2sgrad_loss(b.P_loc, targets.y_loc, targets.w_loc);
    if (emits_dia) loss.loss_dia += p2sgrad_loss(b.P_dia, targets.y_dia, targets.w_dia);
    if (b.has_tokens) loss.loss_token += p2sgrad_loss(b.P_token, targets.y_token);
  }
  loss.total = loss.loss_loc + loss.loss_dia + loss.loss_token;
  check_finite(loss);
  return loss;
}

void check_finite(const LossBreakdown& loss) {
  if (!std::isfinite(loss.loss_loc) || !std::isfinite(loss.loss_dia) ||
      !std::isfinite(loss.loss_token) || !std::isfinite(loss.total)) {
    std::ostringstream os;
    os << "non-finite loss: loc=" << loss.loss_loc << " dia=" << loss.loss_dia
       << " token=" << loss.loss_token << " total=" << loss.total;
    throw DivergenceError(os.str());
  }
}

}  // namespace spoofdiar
