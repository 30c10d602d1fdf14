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

// Minibatch Adam training of the joint objective with best-dev selection.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spoofdiar/attractor_model.hpp"
#include "spoofdiar/inference.hpp"
#include "spoofdiar/objectives.hpp"
#include "spoofdiar/synthetic_corpus.hpp"

namespace spoofdiar {

enum class Selection { dev_loss, dev_jer };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;  // utterances
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Global gradient norm cap; 0 disables clipping.
  double grad_clip = 5.0;
  bool include_masked = false;
  Selection selection = Selection::dev_loss;

  void validate() const;
};

struct StepLog {
  int epoch = 0;
  int step = 0;  // global, 1-based
  LossBreakdown loss;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;  // mean over steps
  LossBreakdown dev;
  std::optional<double> dev_jer;
};

struct TrainResult {
  ModelParams best;
  int best_epoch = 0;  // 0 == initial parameters
  double best_score = 0.0;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
};

class Adam {
 public:
  Adam(const ModelParams& params, const TrainConfig& config);
  void step(ModelParams& params, const std::vector<Matrix>& grads);

 private:
  TrainConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

/// Loss value and parameter gradients for a batch, normalized over the batch.
struct BatchGradient {
  LossBreakdown loss;
  std::vector<Matrix> grads;  // ModelParams order
};

BatchGradient batch_gradient(const ModelParams& params, const ModelConfig& config,
                             const std::vector<const FeatUtterance*>& batch, bool include_masked);

/// Mean dev loss (batch-normalized over the whole partition).
LossBreakdown evaluate_loss(const ModelParams& params, const ModelConfig& config,
                            const std::vector<FeatUtterance>& utts, bool include_masked);

/// Scales gradients in place so their global L2 norm is at most max_norm.
/// Returns the norm before scaling.
double clip_gradients(std::vector<Matrix>& grads, double max_norm);

struct TrainCallbacks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
  /// Called with the best parameters so far after every epoch.
  std::function<void(const ModelParams&, int epoch)> on_best;
};

/// Trains from init_model(config, seed). Throws DivergenceError on a
/// non-finite loss; parameters already passed to on_best stay valid.
TrainResult train_model(const ModelConfig& config, const TrainConfig& train,
                        const InferenceConfig& infer, const Corpus& corpus, std::uint64_t seed,
                        const TrainCallbacks& callbacks = {});

/// Dev JER_spoof for a parameter set (oracle k).
double dev_jer(const ModelParams& params, const ModelConfig& config, const InferenceConfig& infer,
               const std::vector<FeatUtterance>& utts);

}  // namespace spoofdiar
