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

#include "spoofdiar/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spoofdiar/errors.hpp"

namespace spoofdiar::ad {

namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw ShapeError("operands belong to different tapes");
  }
}

void check_shape(bool ok, const char* op, Var a, Var b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

bool any_grad(std::initializer_list<Var> vars) {
  for (const auto& v : vars) {
    if (v.needs_grad()) return true;
  }
  return false;
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on non 1x1 var");
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, bool needs_grad, Backprop backprop) {
  Node n;
  if (needs_grad) {
    n.grad = Matrix::Zero(value.rows(), value.cols());
    n.backprop = std::move(backprop);
  }
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root, double seed) {
  if (root.tape() != this) throw ShapeError("backward: var from another tape");
  if (!nodes_[root.id()].needs_grad) return;
  auto& g = nodes_[root.id()].grad;
  if (g.rows() != 1 || g.cols() != 1) throw ShapeError("backward: root must be 1x1");
  g(0, 0) += seed;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (nodes_[i].needs_grad && nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul", a, b);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() * b.value(), any_grad({a, b}),
                          [ia, ib](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
                            if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
                          });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() * b.value().transpose(), any_grad({a, b}),
                          [ia, ib](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib);
                            if (t.needs_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.value(ia);
                          });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), any_grad({a, b}),
                          [ia, ib](Tape& t, std::size_t self) {
                            if (t.needs_grad(ia)) t.grad(ia) += t.grad(self);
                            if (t.needs_grad(ib)) t.grad(ib) += t.grad(self);
                          });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() - b.value(), any_grad({a, b}),
                          [ia, ib](Tape& t, std::size_t self) {
                            if (t.needs_grad(ia)) t.grad(ia) += t.grad(self);
                            if (t.needs_grad(ib)) t.grad(ib) -= t.grad(self);
                          });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a, b);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value().cwiseProduct(b.value()), any_grad({a, b}),
                          [ia, ib](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.needs_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
                            if (t.needs_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
                          });
}

Var scale(Var a, double s) {
  const auto ia = a.id();
  return a.tape()->record(a.value() * s, a.needs_grad(),
                          [ia, s](Tape& t, std::size_t self) {
                            t.grad(ia) += t.grad(self) * s;
                          });
}

Var add_row_broadcast(Var a, Var row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row_broadcast", a, row);
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->record(std::move(out), any_grad({a, row}),
                          [ia, ir](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.needs_grad(ia)) t.grad(ia) += g;
                            if (t.needs_grad(ir)) t.grad(ir) += g.colwise().sum();
                          });
}

Var add_col_broadcast(Var a, Var col) {
  check_same_tape(a, col);
  check_shape(col.cols() == 1 && col.rows() == a.rows(), "add_col_broadcast", a, col);
  const auto ia = a.id(), ic = col.id();
  Matrix out = a.value();
  out.colwise() += col.value().col(0);
  return a.tape()->record(std::move(out), any_grad({a, col}),
                          [ia, ic](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.needs_grad(ia)) t.grad(ia) += g;
                            if (t.needs_grad(ic)) t.grad(ic) += g.rowwise().sum();
                          });
}

Var linear(Var x, Var w, Var b) { return add_row_broadcast(matmul(x, w), b); }

Var gelu(Var a) {
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  });
  return a.tape()->record(std::move(out), a.needs_grad(), [ia](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ia);
    const Matrix& g = t.grad(self);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = x.unaryExpr([inv_sqrt_2pi](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      return cdf + v * pdf;
    });
    t.grad(ia) += g.cwiseProduct(d);
  });
}

Var softmax_rows(Var a) {
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return a.tape()->record(std::move(out), a.needs_grad(), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const ColVector dot = g.cwiseProduct(y).rowwise().sum();
    Matrix dx = g;
    dx.colwise() -= dot;
    t.grad(ia) += dx.cwiseProduct(y);
  });
}

namespace {

// y = x / max(||x||, eps); dy/dx g = (g - y (y.g)) / n   when n > eps.
Matrix normalize_backward_rows(const Matrix& x, const Matrix& y, const Matrix& g,
                               double eps) {
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double n = x.row(r).norm();
    if (n > eps) {
      const double yg = y.row(r).dot(g.row(r));
      dx.row(r) = (g.row(r) - y.row(r) * yg) / n;
    } else {
      dx.row(r) = g.row(r) / eps;
    }
  }
  return dx;
}

}  // namespace

Var l2_normalize_rows(Var a, double eps) {
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.row(r) = x.row(r) / std::max(x.row(r).norm(), eps);
  }
  return a.tape()->record(std::move(out), a.needs_grad(),
                          [ia, eps](Tape& t, std::size_t self) {
                            t.grad(ia) += normalize_backward_rows(t.value(ia), t.value(self),
                                                                  t.grad(self), eps);
                          });
}

Var l2_normalize_cols(Var a, double eps) {
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(c) = x.col(c) / std::max(x.col(c).norm(), eps);
  }
  return a.tape()->record(std::move(out), a.needs_grad(),
                          [ia, eps](Tape& t, std::size_t self) {
                            const Matrix xt = t.value(ia).transpose();
                            const Matrix yt = t.value(self).transpose();
                            const Matrix gt = t.grad(self).transpose();
                            t.grad(ia) += normalize_backward_rows(xt, yt, gt, eps).transpose();
                          });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  check_same_tape(x, gamma);
  check_same_tape(x, beta);
  check_shape(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm gamma", x, gamma);
  check_shape(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm beta", x, beta);
  const Matrix& v = x.value();
  const Eigen::Index n = v.cols();
  Matrix xhat(v.rows(), n);
  ColVector inv_std(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mean = v.row(r).mean();
    const double var = (v.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->record(
      std::move(out), any_grad({x, gamma, beta}),
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                          std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.needs_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
        if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
        if (t.needs_grad(ix)) {
          Matrix gx = g;
          gx.array().rowwise() *= t.value(ig).row(0).array();
          const double n = static_cast<double>(gx.cols());
          for (Eigen::Index r = 0; r < gx.rows(); ++r) {
            const double mean_g = gx.row(r).mean();
            const double mean_gx = gx.row(r).dot(xhat.row(r)) / n;
            t.grad(ix).row(r) +=
                (inv_std(r) * (gx.row(r).array() - mean_g - xhat.row(r).array() * mean_gx))
                    .matrix();
          }
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Eigen::Index rows = 0;
  bool grad = false;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.cols() == parts[0].cols(), "concat_rows", parts[0], p);
    rows += p.rows();
    grad = grad || p.needs_grad();
  }
  Matrix out(rows, parts[0].cols());
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.rows();
  }
  return parts[0].tape()->record(std::move(out), grad,
                                 [layout](Tape& t, std::size_t self) {
                                   for (const auto& [id, offset] : layout) {
                                     if (!t.needs_grad(id)) continue;
                                     t.grad(id) += t.grad(self).middleRows(offset, t.value(id).rows());
                                   }
                                 });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Eigen::Index cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.rows() == parts[0].rows(), "concat_cols", parts[0], p);
    cols += p.cols();
    grad = grad || p.needs_grad();
  }
  Matrix out(parts[0].rows(), cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), at);
    at += p.cols();
  }
  return parts[0].tape()->record(std::move(out), grad,
                                 [layout](Tape& t, std::size_t self) {
                                   for (const auto& [id, offset] : layout) {
                                     if (!t.needs_grad(id)) continue;
                                     t.grad(id) += t.grad(self).middleCols(offset, t.value(id).cols());
                                   }
                                 });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows out of range");
  }
  const auto ia = a.id();
  return a.tape()->record(a.value().middleRows(start, count), a.needs_grad(),
                          [ia, start, count](Tape& t, std::size_t self) {
                            t.grad(ia).middleRows(start, count) += t.grad(self);
                          });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols out of range");
  }
  const auto ia = a.id();
  return a.tape()->record(a.value().middleCols(start, count), a.needs_grad(),
                          [ia, start, count](Tape& t, std::size_t self) {
                            t.grad(ia).middleCols(start, count) += t.grad(self);
                          });
}

Var weighted_sum(const std::vector<Var>& parts, Var weights) {
  if (parts.empty()) throw ShapeError("weighted_sum: no parts");
  if (weights.rows() != 1 || weights.cols() != static_cast<Eigen::Index>(parts.size())) {
    throw ShapeError("weighted_sum: weights must be 1 x parts");
  }
  bool grad = weights.needs_grad();
  Matrix out = Matrix::Zero(parts[0].rows(), parts[0].cols());
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    check_same_tape(parts[0], parts[j]);
    check_shape(parts[j].rows() == out.rows() && parts[j].cols() == out.cols(),
                "weighted_sum", parts[0], parts[j]);
    out += weights.value()(0, static_cast<Eigen::Index>(j)) * parts[j].value();
    ids.push_back(parts[j].id());
    grad = grad || parts[j].needs_grad();
  }
  const auto iw = weights.id();
  return weights.tape()->record(std::move(out), grad,
                                [ids, iw](Tape& t, std::size_t self) {
                                  const Matrix& g = t.grad(self);
                                  for (std::size_t j = 0; j < ids.size(); ++j) {
                                    const auto col = static_cast<Eigen::Index>(j);
                                    if (t.needs_grad(ids[j])) t.grad(ids[j]) += t.value(iw)(0, col) * g;
                                    if (t.needs_grad(iw)) t.grad(iw)(0, col) += g.cwiseProduct(t.value(ids[j])).sum();
                                  }
                                });
}

Var toeplitz(Var diag, Eigen::Index size, Eigen::Index center) {
  if (diag.rows() != 1 || diag.cols() != 2 * center + 1 || size > center + 1) {
    throw ShapeError("toeplitz: size " + std::to_string(size) +
                     " exceeds parameterized span " + std::to_string(center + 1));
  }
  const Matrix& w = diag.value();
  Matrix out(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) out(i, j) = w(0, i - j + center);
  }
  const auto id = diag.id();
  return diag.tape()->record(std::move(out), diag.needs_grad(),
                             [id, size, center](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               Matrix& gw = t.grad(id);
                               for (Eigen::Index i = 0; i < size; ++i) {
                                 for (Eigen::Index j = 0; j < size; ++j) gw(0, i - j + center) += g(i, j);
                               }
                             });
}

Var sum(Var a) {
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), a.needs_grad(), [ia](Tape& t, std::size_t self) {
    t.grad(ia).array() += t.grad(self)(0, 0);
  });
}

Var weighted_squared_error(Var p, const Matrix& target, const ColVector& row_weights) {
  if (target.rows() != p.rows() || target.cols() != p.cols() ||
      row_weights.size() != p.rows()) {
    throw ShapeError("weighted_squared_error: shape mismatch (" +
                     std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                     " vs " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + ")");
  }
  const Matrix diff = p.value() - target;
  Matrix out(1, 1);
  out(0, 0) = row_weights.dot(diff.cwiseAbs2().rowwise().sum());
  const auto ip = p.id();
  return p.tape()->record(std::move(out), p.needs_grad(),
                          [ip, diff, row_weights](Tape& t, std::size_t self) {
                            const double g = t.grad(self)(0, 0);
                            Matrix d = diff;
                            d.array().colwise() *= row_weights.array();
                            t.grad(ip) += 2.0 * g * d;
                          });
}

}  // namespace spoofdiar::ad
