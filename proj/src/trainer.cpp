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

#include "spoofdiar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spoofdiar/errors.hpp"
#include "spoofdiar/metrics.hpp"

namespace spoofdiar {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon must be > 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
}

Adam::Adam(const ModelParams& params, const TrainConfig& config) : config_(config) {
  for (const auto& t : params.tensors()) {
    m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

void Adam::step(ModelParams& params, const std::vector<Matrix>& grads) {
  if (grads.size() != m_.size()) throw ShapeError("Adam: gradient count mismatch");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto& tensors = params.tensors();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
    const Matrix m_hat = m_[i] / c1;
    const Matrix v_hat = v_[i] / c2;
    tensors[i].value.array() -=
        config_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + config_.adam_epsilon);
  }
}

double clip_gradients(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

namespace {

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.loss_loc += b.loss_loc;
  a.loss_dia += b.loss_dia;
  a.loss_token += b.loss_token;
  a.total += b.total;
  return a;
}

LossBreakdown scaled(LossBreakdown a, double s) {
  a.loss_loc *= s;
  a.loss_dia *= s;
  a.loss_token *= s;
  a.total *= s;
  return a;
}

}  // namespace

BatchGradient batch_gradient(const ModelParams& params, const ModelConfig& config,
                             const std::vector<const FeatUtterance*>& batch, bool include_masked) {
  const auto opts = target_options(config, include_masked);
  std::vector<Targets> targets;
  LossNormalizers norm;
  for (const auto* u : batch) {
    targets.push_back(build_targets(u->frame_labels, &u->speech_mask, opts));
    norm += LossNormalizers::of(targets.back());
  }
  BatchGradient out;
  for (const auto& t : params.tensors()) out.grads.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ad::Tape tape;
    const auto bound = bind(tape, params, true);
    const auto graph = forward_graph(bound, config, tape.constant(batch[b]->features));
    const auto loss = total_loss_graph(graph, targets[b], config, norm);
    out.loss += loss.values();
    check_finite(out.loss);
    tape.backward(loss.total);
    for (std::size_t i = 0; i < bound.vars.size(); ++i) out.grads[i] += bound.vars[i].grad();
  }
  return out;
}

LossBreakdown evaluate_loss(const ModelParams& params, const ModelConfig& config,
                            const std::vector<FeatUtterance>& utts, bool include_masked) {
  const auto opts = target_options(config, include_masked);
  std::vector<Targets> targets;
  LossNormalizers norm;
  for (const auto& u : utts) {
    targets.push_back(build_targets(u.frame_labels, &u.speech_mask, opts));
    norm += LossNormalizers::of(targets.back());
  }
  LossBreakdown total;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    ad::Tape tape;
    const auto bound = bind(tape, params, false);
    const auto graph = forward_graph(bound, config, tape.constant(utts[i].features));
    total += total_loss_graph(graph, targets[i], config, norm).values();
  }
  check_finite(total);
  return total;
}

double dev_jer(const ModelParams& params, const ModelConfig& config, const InferenceConfig& infer,
               const std::vector<FeatUtterance>& utts) {
  std::vector<DiarizationHypothesis> hyps;
  hyps.reserve(utts.size());
  for (const auto& u : utts) {
    hyps.push_back(diarize_utterance(params, config, infer, u,
                                     reference_spoof_count(u.frame_labels, &u.speech_mask)));
  }
  std::vector<ScoredUtterance> scored;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    scored.push_back({&utts[i].frame_labels, &hyps[i].frame_assignments, &utts[i].speech_mask});
  }
  return score_corpus(scored).jer_spoof;
}

TrainResult train_model(const ModelConfig& config, const TrainConfig& train,
                        const InferenceConfig& infer, const Corpus& corpus, std::uint64_t seed,
                        const TrainCallbacks& callbacks) {
  config.validate();
  train.validate();
  if (corpus.train.empty()) throw ConfigError("training partition is empty");
  ModelParams params = init_model(config, seed);
  Adam adam(params, train);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x73687566U};
  std::mt19937_64 rng(seq);

  auto score = [&](const ModelParams& p, EpochLog& log) {
    if (!corpus.dev.empty()) log.dev = evaluate_loss(p, config, corpus.dev, train.include_masked);
    if (train.selection == Selection::dev_jer && !corpus.dev.empty()) {
      log.dev_jer = dev_jer(p, config, infer, corpus.dev);
      return *log.dev_jer;
    }
    return log.dev.total;
  };

  TrainResult result;
  {
    EpochLog initial;
    result.best_score = score(params, initial);
    result.best = params;
    result.best_epoch = 0;
  }

  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    int n_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      std::vector<const FeatUtterance*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(train.batch_size)); ++i) {
        batch.push_back(&corpus.train[order[i]]);
      }
      auto g = batch_gradient(params, config, batch, train.include_masked);
      clip_gradients(g.grads, train.grad_clip);
      adam.step(params, g.grads);
      ++step;
      ++n_steps;
      StepLog sl{epoch, step, g.loss};
      result.steps.push_back(sl);
      log.train += g.loss;
      if (callbacks.on_step) callbacks.on_step(sl);
    }
    log.train = scaled(log.train, 1.0 / std::max(1, n_steps));
    const double s = score(params, log);
    if (!corpus.dev.empty() && s < result.best_score) {
      result.best_score = s;
      result.best = params;
      result.best_epoch = epoch;
    } else if (corpus.dev.empty()) {
      result.best = params;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(log);
    if (callbacks.on_epoch) callbacks.on_epoch(log);
    if (callbacks.on_best) callbacks.on_best(result.best, result.best_epoch);
  }
  return result;
}

}  // namespace spoofdiar
