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

// Merged-branch spoof diarization network with learnable attractor tokens.
//
//   features -> linear (+ positional enc.) -> [frames ; tokens]
//            -> transformer stack -> per-layer weighted sums (frames, tokens)
//            -> A (M x d) -> gMLP -> E
//   S = gelu(E_frames W_s + b_s),  C = gelu(E_tokens W_c + b_c)
//   P_loc = softmax(norm(S) W_Qs (norm(C) W_Ks)^T / sqrt(d))
//   H     = softmax(norm(E_frames) W_Qe (norm(C) W_Ke)^T / sqrt(d)) (C W_Ve)
//   E'    = [E_frames, H]
//   P_dia = norm(E') norm(O_dia),  P_token = [norm(C_0) norm(O_token1), norm(C_1) norm(O_token2)]
//
// Token 0 is the bona fide attractor, token 1 the spoof attractor. With tokens
// disabled P_loc comes from a linear two-way softmax head and E' = E_frames.
// The dual_branch architecture instantiates two disjoint networks: one
// supervised for localization, one for diarization.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spoofdiar/autodiff.hpp"

namespace spoofdiar {

using Matrix = ad::Matrix;

enum class Architecture { merged, dual_branch };
enum class LabelScheme { mul, spf };

struct TokenTargets {
  bool dia = true;
  bool loc = true;

  bool any() const { return dia || loc; }
  bool operator==(const TokenTargets&) const = default;
};

struct ModelConfig {
  int d_feat = 16;
  int d = 32;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 64;
  int n_tokens = 2;
  int num_classes = 4;  // L: bona + spoof methods seen in training
  int gmlp_depth = 1;
  int gmlp_d_ffn = 128;
  int max_len = 512;  // longest sequence (frames + tokens) the gMLP accepts
  Architecture architecture = Architecture::merged;
  bool use_attractor_tokens = true;
  TokenTargets token_targets;
  LabelScheme label_scheme = LabelScheme::mul;
  bool use_loc_loss = true;
  bool positional_encoding = true;
  double token_init_scale = 0.1;

  void validate() const;
  /// Columns of P_dia: L, plus the concat class (last column) under Mul.
  int dia_classes() const;
  /// Width of E' in a branch that emits diarization embeddings.
  int embedding_dim() const;
  bool tokens_guide_loc() const { return use_attractor_tokens && token_targets.loc; }
  bool tokens_guide_dia() const { return use_attractor_tokens && token_targets.dia; }
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Ordered, named parameter tensors.
class ModelParams {
 public:
  std::size_t add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  const Matrix& get(std::string_view name) const;
  Matrix& get(std::string_view name);

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t num_scalars() const;

 private:
  std::vector<NamedTensor> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// One network (the whole model when merged, one of two when dual_branch).
struct BranchLayout {
  std::string prefix;
  bool emits_loc = true;
  bool emits_dia = true;
};

std::vector<BranchLayout> branch_layouts(const ModelConfig& config);

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// Tape handles for every parameter, in ModelParams order.
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<ad::Var> vars;

  ad::Var operator[](std::string_view name) const;
  bool contains(std::string_view name) const { return params->contains(name); }
};

/// Puts every parameter on the tape (as variables when trainable).
BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable);

struct BranchGraph {
  bool has_tokens = false;
  bool emits_loc = false;
  bool emits_dia = false;
  ad::Var E;        // M x d (T x d without tokens)
  ad::Var E_frames; // T x d
  ad::Var S;        // T x d
  ad::Var C;        // N x d
  ad::Var P_loc;    // T x 2
  ad::Var H;        // T x d
  ad::Var E_prime;  // T x d'
  ad::Var P_dia;    // T x dia_classes
  ad::Var P_token;  // 1 x L
};

struct ForwardGraph {
  std::vector<BranchGraph> branches;
  int loc_branch = 0;
  int dia_branch = 0;
};

ForwardGraph forward_graph(const BoundParams& params, const ModelConfig& config,
                           ad::Var features);

struct BranchOutputs {
  bool has_tokens = false;
  Matrix E, S, C, P_loc, H, E_prime, P_dia, P_token;
};

struct ForwardOutputs {
  std::vector<BranchOutputs> branches;
  int loc_branch = 0;
  int dia_branch = 0;

  const Matrix& P_loc() const { return branches.at(static_cast<std::size_t>(loc_branch)).P_loc; }
  const Matrix& E_prime() const { return branches.at(static_cast<std::size_t>(dia_branch)).E_prime; }
  const Matrix& P_dia() const { return branches.at(static_cast<std::size_t>(dia_branch)).P_dia; }
  /// Token scores of the merged model (or the dia branch when dual).
  const Matrix& P_token() const { return branches.at(static_cast<std::size_t>(dia_branch)).P_token; }
};

ForwardOutputs collect_outputs(const ForwardGraph& graph);

/// Evaluates the network on T x d_feat features. Throws ShapeError on T == 0.
ForwardOutputs forward(const ModelParams& params, const ModelConfig& config,
                       const Matrix& features);

/// softmax over tokens of (norm(S) W_Qs)(norm(C) W_Ks)^T / sqrt(d).
ad::Var cross_attention_loc(ad::Var S, ad::Var C, ad::Var W_Qs, ad::Var W_Ks, int d);
Matrix cross_attention_loc(const Matrix& S, const Matrix& C, const Matrix& W_Qs,
                           const Matrix& W_Ks, int d);

/// softmax((norm(E) W_Qe)(norm(C) W_Ke)^T / sqrt(d)) (C W_Ve).
ad::Var attractor_conditioning(ad::Var E_frames, ad::Var C, ad::Var W_Qe, ad::Var W_Ke,
                               ad::Var W_Ve, int d);
Matrix attractor_conditioning(const Matrix& E_frames, const Matrix& C, const Matrix& W_Qe,
                              const Matrix& W_Ke, const Matrix& W_Ve, int d);

/// Sinusoidal encodings for T positions of width d.
Matrix sinusoidal_positions(int T, int d);

}  // namespace spoofdiar
