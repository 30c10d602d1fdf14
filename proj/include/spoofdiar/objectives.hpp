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

// P2SGrad objectives: squared error between cosine-similarity (or attention
// probability) scores and one-hot / multi-hot targets.

#pragma once

#include <span>

#include "spoofdiar/attractor_model.hpp"
#include "spoofdiar/label_timeline.hpp"

namespace spoofdiar {

inline constexpr double kNormEpsilon = 1e-12;

/// P[i,k] = <x_i / |x_i|, o_k / |o_k|>; norms floored at kNormEpsilon.
ad::Var cosine_prototype_scores(ad::Var X, ad::Var O);
Matrix cosine_prototype_scores(const Matrix& X, const Matrix& O);

/// mean_i sum_k (P[i,k] - Y[i,k])^2.
double p2sgrad_loss(const Matrix& P, const Matrix& Y);
/// Same with class-index targets.
double p2sgrad_loss(const Matrix& P, std::span<const int> labels);
/// sum_i w_i sum_k (P[i,k] - Y[i,k])^2 / sum_i w_i; 0 when all weights are 0.
double p2sgrad_loss(const Matrix& P, const Matrix& Y, const ad::ColVector& weights);

struct Targets {
  Matrix y_loc;          // T x 2, column 0 = bona
  ad::ColVector w_loc;   // T
  Matrix y_dia;          // T x dia_classes
  ad::ColVector w_dia;   // T
  Matrix y_token;        // 1 x L multi-hot

  int num_frames() const { return static_cast<int>(y_loc.rows()); }
};

struct TargetOptions {
  LabelScheme scheme = LabelScheme::mul;
  int num_classes = 4;  // model L
  /// Keep non-speech frames in the frame losses.
  bool include_masked = false;
};

/// Throws VocabularyError when a frame label is outside the model classes.
Targets build_targets(const FrameLabels& frames, const SpeechMask* mask,
                      const TargetOptions& options);
TargetOptions target_options(const ModelConfig& config, bool include_masked = false);

struct LossBreakdown {
  double loss_loc = 0.0;
  double loss_dia = 0.0;
  double loss_token = 0.0;
  double total = 0.0;
};

/// Denominators of the frame / utterance averages. For a mini-batch these are
/// accumulated over every utterance so that each utterance's contribution is
/// scaled by the batch population.
struct LossNormalizers {
  double loc_weight = 0.0;
  double dia_weight = 0.0;
  double utterances = 0.0;

  static LossNormalizers of(const Targets& targets);
  LossNormalizers& operator+=(const LossNormalizers& other);
};

struct LossGraph {
  ad::Var loss_loc;
  ad::Var loss_dia;
  ad::Var loss_token;
  ad::Var total;

  LossBreakdown values() const;
};

/// Differentiable total objective. Disabled terms are exact zeros.
LossGraph total_loss_graph(const ForwardGraph& graph, const Targets& targets,
                           const ModelConfig& config, const LossNormalizers& norm);

/// Value-only objective, computed directly from forward outputs.
/// Throws DivergenceError on a non-finite term.
LossBreakdown total_loss(const ForwardOutputs& out, const Targets& targets,
                         const ModelConfig& config);

void check_finite(const LossBreakdown& loss);

}  // namespace spoofdiar
