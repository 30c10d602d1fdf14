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

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation in creation order; backward() walks it in
// reverse and accumulates gradients into nodes that need them. All matrices
// are row = time / sample, column = feature.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace spoofdiar::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using ColVector = Eigen::VectorXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool needs_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked (a parameter).
  Var variable(Matrix value);
  /// Leaf without gradient (data, targets).
  Var constant(Matrix value);

  /// Records an op node. `backprop` reads grad(self) and accumulates into the
  /// inputs; it is only invoked when the node needs a gradient.
  Var record(Matrix value, bool needs_grad, Backprop backprop);

  /// Seeds d(root)/d(root) = seed (root must be 1x1) and propagates.
  void backward(Var root, double seed = 1.0);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  Matrix& grad(std::size_t id) { return nodes_[id].grad; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b);          // a b
Var matmul_nt(Var a, Var b);       // a b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);             // elementwise
Var scale(Var a, double s);
Var add_row_broadcast(Var a, Var row);  // a + 1 row   (row: 1 x cols)
Var add_col_broadcast(Var a, Var col);  // a + col 1^T (col: rows x 1)
Var linear(Var x, Var w, Var b);        // x w + b

// Nonlinearities.
Var gelu(Var a);  // exact erf form
Var softmax_rows(Var a);
Var l2_normalize_rows(Var a, double eps = 1e-12);
Var l2_normalize_cols(Var a, double eps = 1e-12);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

// Structure.
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Sum_j weights(0, j) * parts[j]; weights is 1 x parts.size().
Var weighted_sum(const std::vector<Var>& parts, Var weights);
/// size x size matrix W[i][j] = diag(0, (i - j) + center); diag is 1 x (2*center+1).
Var toeplitz(Var diag, Eigen::Index size, Eigen::Index center);

// Reductions.
Var sum(Var a);
/// Sum_i w_i * Sum_k (p_ik - y_ik)^2 with constant y and w (rows x 1).
Var weighted_squared_error(Var p, const Matrix& target, const ColVector& row_weights);

}  // namespace spoofdiar::ad
