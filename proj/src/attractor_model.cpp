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

#include "spoofdiar/attractor_model.hpp"

#include <cmath>
#include <random>

#include "spoofdiar/errors.hpp"
#include "spoofdiar/objectives.hpp"

namespace spoofdiar {

using ad::Var;

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model." + what);
  };
  require(d_feat > 0, "d_feat must be > 0");
  require(d > 0, "d must be > 0");
  require(n_layers > 0, "n_layers must be > 0");
  require(n_heads > 0 && d % n_heads == 0, "d must be divisible by n_heads");
  require(d_ff > 0, "d_ff must be > 0");
  require(n_tokens == 2, "n_tokens must be 2 (bona and spoof attractors)");
  require(num_classes >= 2, "num_classes must be >= 2");
  require(gmlp_depth >= 0, "gmlp_depth must be >= 0");
  require(gmlp_d_ffn > 0 && gmlp_d_ffn % 2 == 0, "gmlp_d_ffn must be even and > 0");
  require(max_len > n_tokens, "max_len must exceed the token count");
  require(!use_attractor_tokens || token_targets.any(),
          "token_targets must be non-empty when attractor tokens are used");
  require(token_init_scale > 0.0, "token_init_scale must be > 0");
}

int ModelConfig::dia_classes() const {
  return label_scheme == LabelScheme::mul ? num_classes + 1 : num_classes;
}

int ModelConfig::embedding_dim() const { return tokens_guide_dia() ? 2 * d : d; }

std::size_t ModelParams::add(std::string name, Matrix value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_.emplace(name, tensors_.size());
  tensors_.push_back(NamedTensor{std::move(name), std::move(value)});
  return tensors_.size() - 1;
}

bool ModelParams::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::size_t ModelParams::index_of(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Matrix& ModelParams::get(std::string_view name) const {
  return tensors_[index_of(name)].value;
}

Matrix& ModelParams::get(std::string_view name) { return tensors_[index_of(name)].value; }

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::vector<BranchLayout> branch_layouts(const ModelConfig& config) {
  if (config.architecture == Architecture::merged) return {BranchLayout{"", true, true}};
  return {BranchLayout{"loc_branch.", true, false}, BranchLayout{"dia_branch.", false, true}};
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Matrix xavier(int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng_);
    return m;
  }

  Matrix uniform(int rows, int cols, double a) {
    std::uniform_real_distribution<double> u(-a, a);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng_);
    return m;
  }

  Matrix gaussian(int rows, int cols, double std) {
    std::normal_distribution<double> n(0.0, std);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng_);
    return m;
  }

  /// Rows drawn uniformly on the sphere of the given radius.
  Matrix spherical(int rows, int cols, double radius) {
    Matrix m = gaussian(rows, cols, 1.0);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) *= radius / m.row(r).norm();
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

Matrix zeros(int rows, int cols) { return Matrix::Zero(rows, cols); }
Matrix ones(int rows, int cols) { return Matrix::Ones(rows, cols); }

void init_branch(ModelParams& params, const ModelConfig& c, const BranchLayout& layout,
                 Initializer& init) {
  const auto& pre = layout.prefix;
  const int d = c.d;
  const bool tokens = c.use_attractor_tokens;
  params.add(pre + "input.W", init.xavier(c.d_feat, d));
  params.add(pre + "input.b", zeros(1, d));
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = pre + "encoder." + std::to_string(l) + ".";
    params.add(p + "ln1.gamma", ones(1, d));
    params.add(p + "ln1.beta", zeros(1, d));
    for (const char* n : {"q", "k", "v", "o"}) {
      params.add(p + "attn.W_" + n, init.xavier(d, d));
      params.add(p + "attn.b_" + n, zeros(1, d));
    }
    params.add(p + "ln2.gamma", ones(1, d));
    params.add(p + "ln2.beta", zeros(1, d));
    params.add(p + "ffn.W1", init.xavier(d, c.d_ff));
    params.add(p + "ffn.b1", zeros(1, c.d_ff));
    params.add(p + "ffn.W2", init.xavier(c.d_ff, d));
    params.add(p + "ffn.b2", zeros(1, d));
  }
  params.add(pre + "layer_weights_frames", zeros(1, c.n_layers));
  if (tokens) {
    params.add(pre + "layer_weights_tokens", zeros(1, c.n_layers));
    params.add(pre + "attractor_tokens", init.spherical(c.n_tokens, d, c.token_init_scale));
  }
  const int half = c.gmlp_d_ffn / 2;
  for (int g = 0; g < c.gmlp_depth; ++g) {
    const std::string p = pre + "gmlp." + std::to_string(g) + ".";
    params.add(p + "ln.gamma", ones(1, d));
    params.add(p + "ln.beta", zeros(1, d));
    params.add(p + "proj_in.W", init.xavier(d, c.gmlp_d_ffn));
    params.add(p + "proj_in.b", zeros(1, c.gmlp_d_ffn));
    params.add(p + "sgu.ln.gamma", ones(1, half));
    params.add(p + "sgu.ln.beta", zeros(1, half));
    // Near-zero spatial weights and unit bias: the gate starts as identity.
    params.add(p + "sgu.spatial", init.uniform(1, 2 * c.max_len - 1, 1e-2 / c.max_len));
    params.add(p + "sgu.spatial_bias", ones(c.max_len, 1));
    params.add(p + "proj_out.W", init.xavier(half, d));
    params.add(p + "proj_out.b", zeros(1, d));
  }
  if (tokens) {
    params.add(pre + "W_c", init.xavier(d, d));
    params.add(pre + "b_c", zeros(1, d));
  }
  if (layout.emits_loc) {
    if (tokens && c.token_targets.loc) {
      params.add(pre + "W_s", init.xavier(d, d));
      params.add(pre + "b_s", zeros(1, d));
      params.add(pre + "W_Qs", init.xavier(d, d));
      params.add(pre + "W_Ks", init.xavier(d, d));
    } else {
      params.add(pre + "loc_head.W", init.xavier(d, 2));
      params.add(pre + "loc_head.b", zeros(1, 2));
    }
  }
  if (layout.emits_dia) {
    if (tokens && c.token_targets.dia) {
      params.add(pre + "W_Qe", init.xavier(d, d));
      params.add(pre + "W_Ke", init.xavier(d, d));
      params.add(pre + "W_Ve", init.xavier(d, d));
    }
    const int dp = (tokens && c.token_targets.dia) ? 2 * d : d;
    params.add(pre + "O_dia", init.gaussian(dp, c.dia_classes(), 1.0));
  }
  if (tokens) {
    params.add(pre + "O_token1", init.gaussian(d, 1, 1.0));
    params.add(pre + "O_token2", init.gaussian(d, c.num_classes - 1, 1.0));
  }
}

Var multi_head_attention(Var x, const BoundParams& P, const std::string& p, int n_heads) {
  const auto d = x.cols();
  const auto dh = d / n_heads;
  Var q = ad::linear(x, P[p + "W_q"], P[p + "b_q"]);
  Var k = ad::linear(x, P[p + "W_k"], P[p + "b_k"]);
  Var v = ad::linear(x, P[p + "W_v"], P[p + "b_v"]);
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < n_heads; ++h) {
    Var qh = ad::slice_cols(q, h * dh, dh);
    Var kh = ad::slice_cols(k, h * dh, dh);
    Var vh = ad::slice_cols(v, h * dh, dh);
    Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
    heads.push_back(ad::matmul(attn, vh));
  }
  Var o = n_heads == 1 ? heads[0] : ad::concat_cols(heads);
  return ad::linear(o, P[p + "W_o"], P[p + "b_o"]);
}

Var encoder_layer(Var x, const BoundParams& P, const std::string& p, int n_heads) {
  Var h = ad::layer_norm_rows(x, P[p + "ln1.gamma"], P[p + "ln1.beta"]);
  x = ad::add(x, multi_head_attention(h, P, p + "attn.", n_heads));
  h = ad::layer_norm_rows(x, P[p + "ln2.gamma"], P[p + "ln2.beta"]);
  h = ad::gelu(ad::linear(h, P[p + "ffn.W1"], P[p + "ffn.b1"]));
  return ad::add(x, ad::linear(h, P[p + "ffn.W2"], P[p + "ffn.b2"]));
}

Var gmlp_block(Var x, const BoundParams& P, const std::string& p, int max_len) {
  const auto M = x.rows();
  if (M > max_len) {
    throw ShapeError("sequence of " + std::to_string(M) + " exceeds model.max_len " +
                     std::to_string(max_len));
  }
  Var h = ad::layer_norm_rows(x, P[p + "ln.gamma"], P[p + "ln.beta"]);
  h = ad::gelu(ad::linear(h, P[p + "proj_in.W"], P[p + "proj_in.b"]));
  const auto half = h.cols() / 2;
  Var u = ad::slice_cols(h, 0, half);
  Var v = ad::slice_cols(h, half, half);
  v = ad::layer_norm_rows(v, P[p + "sgu.ln.gamma"], P[p + "sgu.ln.beta"]);
  Var spatial = ad::toeplitz(P[p + "sgu.spatial"], M, max_len - 1);
  v = ad::add_col_broadcast(ad::matmul(spatial, v), ad::slice_rows(P[p + "sgu.spatial_bias"], 0, M));
  h = ad::linear(ad::mul(u, v), P[p + "proj_out.W"], P[p + "proj_out.b"]);
  return ad::add(x, h);
}

BranchGraph branch_forward(const BoundParams& P, const ModelConfig& c,
                           const BranchLayout& layout, Var features) {
  auto param = [&](const std::string& name) { return P[layout.prefix + name]; };
  ad::Tape& tape = *features.tape();
  const auto T = features.rows();
  const bool tokens = c.use_attractor_tokens;

  BranchGraph g;
  g.has_tokens = tokens;
  g.emits_loc = layout.emits_loc;
  g.emits_dia = layout.emits_dia;

  Var x = ad::linear(features, param("input.W"), param("input.b"));
  if (c.positional_encoding) {
    x = ad::add(x, tape.constant(sinusoidal_positions(static_cast<int>(T), c.d)));
  }
  if (tokens) x = ad::concat_rows({x, param("attractor_tokens")});

  std::vector<Var> frame_layers, token_layers;
  for (int l = 0; l < c.n_layers; ++l) {
    x = encoder_layer(x, P, layout.prefix + "encoder." + std::to_string(l) + ".", c.n_heads);
    frame_layers.push_back(tokens ? ad::slice_rows(x, 0, T) : x);
    if (tokens) token_layers.push_back(ad::slice_rows(x, T, c.n_tokens));
  }
  Var a = ad::weighted_sum(frame_layers, ad::softmax_rows(param("layer_weights_frames")));
  if (tokens) {
    Var a_tok = ad::weighted_sum(token_layers, ad::softmax_rows(param("layer_weights_tokens")));
    a = ad::concat_rows({a, a_tok});
  }

  Var e = a;
  for (int b = 0; b < c.gmlp_depth; ++b) {
    e = gmlp_block(e, P, layout.prefix + "gmlp." + std::to_string(b) + ".", c.max_len);
  }
  g.E = e;
  g.E_frames = tokens ? ad::slice_rows(e, 0, T) : e;

  if (tokens) {
    Var e_tok = ad::slice_rows(e, T, c.n_tokens);
    g.C = ad::gelu(ad::linear(e_tok, param("W_c"), param("b_c")));
  }

  if (layout.emits_loc) {
    if (tokens && c.token_targets.loc) {
      g.S = ad::gelu(ad::linear(g.E_frames, param("W_s"), param("b_s")));
      g.P_loc = cross_attention_loc(g.S, g.C, param("W_Qs"), param("W_Ks"), c.d);
    } else {
      g.P_loc = ad::softmax_rows(ad::linear(g.E_frames, param("loc_head.W"), param("loc_head.b")));
    }
  }

  if (layout.emits_dia) {
    if (tokens && c.token_targets.dia) {
      g.H = attractor_conditioning(g.E_frames, g.C, param("W_Qe"), param("W_Ke"),
                                   param("W_Ve"), c.d);
      g.E_prime = ad::concat_cols({g.E_frames, g.H});
    } else {
      g.E_prime = g.E_frames;
    }
    g.P_dia = cosine_prototype_scores(g.E_prime, param("O_dia"));
  }

  if (tokens) {
    Var bona = cosine_prototype_scores(ad::slice_rows(g.C, 0, 1), param("O_token1"));
    Var spoof = cosine_prototype_scores(ad::slice_rows(g.C, 1, 1), param("O_token2"));
    g.P_token = ad::concat_cols({bona, spoof});
  }
  return g;
}

Matrix value_or_empty(const Var& v) { return v.valid() ? v.value() : Matrix(); }

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Initializer init(seed);
  ModelParams params;
  for (const auto& layout : branch_layouts(config)) init_branch(params, config, layout, init);
  return params;
}

Var BoundParams::operator[](std::string_view name) const {
  return vars[params->index_of(name)];
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  BoundParams b;
  b.params = &params;
  b.vars.reserve(params.size());
  for (const auto& t : params.tensors()) {
    b.vars.push_back(trainable ? tape.variable(t.value) : tape.constant(t.value));
  }
  return b;
}

ForwardGraph forward_graph(const BoundParams& params, const ModelConfig& config,
                           Var features) {
  if (features.rows() == 0) throw ShapeError("forward: empty input (T == 0)");
  if (features.cols() != config.d_feat) {
    throw ShapeError("forward: expected " + std::to_string(config.d_feat) +
                     " feature columns, got " + std::to_string(features.cols()));
  }
  ForwardGraph g;
  for (const auto& layout : branch_layouts(config)) {
    g.branches.push_back(branch_forward(params, config, layout, features));
  }
  if (config.architecture == Architecture::dual_branch) {
    g.loc_branch = 0;
    g.dia_branch = 1;
  }
  return g;
}

ForwardOutputs collect_outputs(const ForwardGraph& graph) {
  ForwardOutputs out;
  out.loc_branch = graph.loc_branch;
  out.dia_branch = graph.dia_branch;
  for (const auto& b : graph.branches) {
    BranchOutputs o;
    o.has_tokens = b.has_tokens;
    o.E = value_or_empty(b.E);
    o.S = value_or_empty(b.S);
    o.C = value_or_empty(b.C);
    o.P_loc = value_or_empty(b.P_loc);
    o.H = value_or_empty(b.H);
    o.E_prime = value_or_empty(b.E_prime);
    o.P_dia = value_or_empty(b.P_dia);
    o.P_token = value_or_empty(b.P_token);
    out.branches.push_back(std::move(o));
  }
  return out;
}

ForwardOutputs forward(const ModelParams& params, const ModelConfig& config,
                       const Matrix& features) {
  if (features.rows() == 0) throw ShapeError("forward: empty input (T == 0)");
  ad::Tape tape;
  const auto bound = bind(tape, params, false);
  const auto graph = forward_graph(bound, config, tape.constant(features));
  return collect_outputs(graph);
}

Var cross_attention_loc(Var S, Var C, Var W_Qs, Var W_Ks, int d) {
  Var q = ad::matmul(ad::l2_normalize_rows(S, kNormEpsilon), W_Qs);
  Var k = ad::matmul(ad::l2_normalize_rows(C, kNormEpsilon), W_Ks);
  return ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
}

Matrix cross_attention_loc(const Matrix& S, const Matrix& C, const Matrix& W_Qs,
                           const Matrix& W_Ks, int d) {
  ad::Tape tape;
  return cross_attention_loc(tape.constant(S), tape.constant(C), tape.constant(W_Qs),
                             tape.constant(W_Ks), d)
      .value();
}

Var attractor_conditioning(Var E_frames, Var C, Var W_Qe, Var W_Ke, Var W_Ve, int d) {
  Var q = ad::matmul(ad::l2_normalize_rows(E_frames, kNormEpsilon), W_Qe);
  Var k = ad::matmul(ad::l2_normalize_rows(C, kNormEpsilon), W_Ke);
  Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
  return ad::matmul(attn, ad::matmul(C, W_Ve));
}

Matrix attractor_conditioning(const Matrix& E_frames, const Matrix& C, const Matrix& W_Qe,
                              const Matrix& W_Ke, const Matrix& W_Ve, int d) {
  ad::Tape tape;
  return attractor_conditioning(tape.constant(E_frames), tape.constant(C), tape.constant(W_Qe),
                                tape.constant(W_Ke), tape.constant(W_Ve), d)
      .value();
}

Matrix sinusoidal_positions(int T, int d) {
  Matrix pe(T, d);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      pe(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

}  // namespace spoofdiar
