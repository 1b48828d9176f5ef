// Copyright 2026 The fedrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedrecon/tape.hpp"

#include <cmath>
#include <utility>

namespace fedrecon::ad {

namespace {

double softplus_scalar(double x) {
  // max(x,0) + log1p(exp(-|x|)) is stable on both tails.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_scalar(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int Tape::check(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError("tape: invalid variable handle");
  }
  return v.id;
}

Var Tape::emit(Matrix value, bool tracked, Pull pull) {
  Node node;
  node.value = std::move(value);
  node.tracked = tracked;
  node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix v) { return emit(std::move(v), true, nullptr); }

Var Tape::constant(Matrix v) { return emit(std::move(v), false, nullptr); }

Var Tape::constant_scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  require(m.rows() == 1 && m.cols() == 1, "tape: scalar() on non 1x1 node");
  return m(0, 0);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.tracked) return;
  if (!n.has_adjoint) {
    n.adjoint = g;
    n.has_adjoint = true;
  } else {
    n.adjoint += g;
  }
}

Var Tape::add(Var a, Var b) {
  int ia = check(a), ib = check(b);
  bool t = tracked(a) || tracked(b);
  return emit(nodes_[ia].value + nodes_[ib].value, t, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  int ia = check(a), ib = check(b);
  bool t = tracked(a) || tracked(b);
  return emit(nodes_[ia].value - nodes_[ib].value, t, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, Matrix(-g));
  });
}

Var Tape::neg(Var a) {
  int ia = check(a);
  return emit(-nodes_[ia].value, tracked(a),
              [ia](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix(-g)); });
}

Var Tape::matmul(Var a, Var b) {
  int ia = check(a), ib = check(b);
  require(nodes_[ia].value.cols() == nodes_[ib].value.rows(), "tape: matmul dimension mismatch");
  bool t = tracked(a) || tracked(b);
  return emit(nodes_[ia].value * nodes_[ib].value, t, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g * t.nodes_[ib].value.transpose()));
    t.accumulate(ib, Matrix(t.nodes_[ia].value.transpose() * g));
  });
}

Var Tape::transpose(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.transpose(), tracked(a),
              [ia](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix(g.transpose())); });
}

Var Tape::cmul(Var a, Var b) {
  int ia = check(a), ib = check(b);
  require(nodes_[ia].value.rows() == nodes_[ib].value.rows() &&
              nodes_[ia].value.cols() == nodes_[ib].value.cols(),
          "tape: cmul shape mismatch");
  bool t = tracked(a) || tracked(b);
  return emit(nodes_[ia].value.cwiseProduct(nodes_[ib].value), t,
              [ia, ib](Tape& t, const Matrix& g) {
                t.accumulate(ia, Matrix(g.cwiseProduct(t.nodes_[ib].value)));
                t.accumulate(ib, Matrix(g.cwiseProduct(t.nodes_[ia].value)));
              });
}

Var Tape::cdiv(Var a, Var b) {
  int ia = check(a), ib = check(b);
  require(nodes_[ia].value.rows() == nodes_[ib].value.rows() &&
              nodes_[ia].value.cols() == nodes_[ib].value.cols(),
          "tape: cdiv shape mismatch");
  bool t = tracked(a) || tracked(b);
  Var out = emit(nodes_[ia].value.cwiseQuotient(nodes_[ib].value), t, nullptr);
  int io = out.id;
  nodes_[io].pull = [ia, ib, io](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.cwiseQuotient(t.nodes_[ib].value)));
    t.accumulate(ib, Matrix(-g.cwiseProduct(t.nodes_[io].value).cwiseQuotient(t.nodes_[ib].value)));
  };
  return out;
}

Var Tape::scale(Var a, double c) {
  int ia = check(a);
  return emit(c * nodes_[ia].value, tracked(a),
              [ia, c](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix(c * g)); });
}

Var Tape::add_scalar(Var a, double c) {
  int ia = check(a);
  return emit(nodes_[ia].value.array() + c, tracked(a),
              [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var Tape::scale_by(Var m, Var s) {
  int im = check(m), is = check(s);
  require(nodes_[is].value.size() == 1, "tape: scale_by expects 1x1 scalar node");
  bool t = tracked(m) || tracked(s);
  double sv = nodes_[is].value(0, 0);
  return emit(sv * nodes_[im].value, t, [im, is](Tape& t, const Matrix& g) {
    t.accumulate(im, Matrix(t.nodes_[is].value(0, 0) * g));
    Matrix gs(1, 1);
    gs(0, 0) = g.cwiseProduct(t.nodes_[im].value).sum();
    t.accumulate(is, gs);
  });
}

Var Tape::relu(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.cwiseMax(0.0), tracked(a), [ia](Tape& t, const Matrix& g) {
    Matrix masked =
        g.cwiseProduct((t.nodes_[ia].value.array() > 0.0).cast<double>().matrix());
    t.accumulate(ia, masked);
  });
}

Var Tape::step_mask(Var a) {
  int ia = check(a);
  return emit((nodes_[ia].value.array() > 0.0).cast<double>(), false, nullptr);
}

Var Tape::sign(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.array().sign(), false, nullptr);
}

Var Tape::abs(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.cwiseAbs(), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.cwiseProduct(t.nodes_[ia].value.array().sign().matrix())));
  });
}

Var Tape::sigmoid(Var a) {
  int ia = check(a);
  Var out = emit(nodes_[ia].value.unaryExpr(&sigmoid_scalar), tracked(a), nullptr);
  int io = out.id;
  nodes_[io].pull = [ia, io](Tape& t, const Matrix& g) {
    const Matrix& y = t.nodes_[io].value;
    t.accumulate(ia, Matrix(g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()))));
  };
  return out;
}

Var Tape::softplus(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.unaryExpr(&softplus_scalar), tracked(a),
              [ia](Tape& t, const Matrix& g) {
                t.accumulate(ia, Matrix(g.cwiseProduct(t.nodes_[ia].value.unaryExpr(&sigmoid_scalar))));
              });
}

Var Tape::log(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.array().log(), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.cwiseQuotient(t.nodes_[ia].value)));
  });
}

Var Tape::exp(Var a) {
  int ia = check(a);
  Var out = emit(nodes_[ia].value.array().exp(), tracked(a), nullptr);
  int io = out.id;
  nodes_[io].pull = [ia, io](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.cwiseProduct(t.nodes_[io].value)));
  };
  return out;
}

Var Tape::square(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.array().square(), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(2.0 * g.cwiseProduct(t.nodes_[ia].value)));
  });
}

Var Tape::sqrt(Var a) {
  int ia = check(a);
  Var out = emit(nodes_[ia].value.array().sqrt(), tracked(a), nullptr);
  int io = out.id;
  nodes_[io].pull = [io, ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(0.5 * g.cwiseQuotient(t.nodes_[io].value)));
  };
  return out;
}

Var Tape::cmax_scalar(Var a, double c) {
  int ia = check(a);
  return emit(nodes_[ia].value.cwiseMax(c), tracked(a), [ia, c](Tape& t, const Matrix& g) {
    Matrix mask = (t.nodes_[ia].value.array() > c).cast<double>();
    t.accumulate(ia, Matrix(g.cwiseProduct(mask)));
  });
}

Var Tape::sum(Var a) {
  int ia = check(a);
  Matrix out(1, 1);
  out(0, 0) = nodes_[ia].value.sum();
  return emit(std::move(out), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(Matrix::Constant(t.nodes_[ia].value.rows(),
                                             t.nodes_[ia].value.cols(), g(0, 0))));
  });
}

Var Tape::mean(Var a) {
  int ia = check(a);
  double n = static_cast<double>(nodes_[ia].value.size());
  Matrix out(1, 1);
  out(0, 0) = nodes_[ia].value.sum() / n;
  return emit(std::move(out), tracked(a), [ia, n](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(Matrix::Constant(t.nodes_[ia].value.rows(),
                                             t.nodes_[ia].value.cols(), g(0, 0) / n)));
  });
}

Var Tape::sum_squares(Var a) {
  int ia = check(a);
  Matrix out(1, 1);
  out(0, 0) = nodes_[ia].value.squaredNorm();
  return emit(std::move(out), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(2.0 * g(0, 0) * t.nodes_[ia].value));
  });
}

Var Tape::row_sums(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.rowwise().sum(), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g * Matrix::Ones(1, t.nodes_[ia].value.cols())));
  });
}

Var Tape::col_sums(Var a) {
  int ia = check(a);
  return emit(nodes_[ia].value.colwise().sum(), tracked(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(Matrix::Ones(t.nodes_[ia].value.rows(), 1) * g));
  });
}

Var Tape::replicate_rows(Var row, int m) {
  int ia = check(row);
  require(nodes_[ia].value.rows() == 1, "tape: replicate_rows expects a row vector");
  return emit(nodes_[ia].value.replicate(m, 1), tracked(row), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.colwise().sum()));
  });
}

Var Tape::hcat(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  require(va.rows() == vb.rows(), "tape: hcat row mismatch");
  Matrix out(va.rows(), va.cols() + vb.cols());
  out << va, vb;
  bool t = tracked(a) || tracked(b);
  long ca = va.cols();
  return emit(std::move(out), t, [ia, ib, ca](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.leftCols(ca)));
    t.accumulate(ib, Matrix(g.rightCols(g.cols() - ca)));
  });
}

Var Tape::block(Var a, int r0, int c0, int rows, int cols) {
  int ia = check(a);
  const Matrix& v = nodes_[ia].value;
  require(r0 >= 0 && c0 >= 0 && r0 + rows <= v.rows() && c0 + cols <= v.cols(),
          "tape: block out of range");
  return emit(v.block(r0, c0, rows, cols), tracked(a),
              [ia, r0, c0, rows, cols](Tape& t, const Matrix& g) {
                Matrix full = Matrix::Zero(t.nodes_[ia].value.rows(), t.nodes_[ia].value.cols());
                full.block(r0, c0, rows, cols) = g;
                t.accumulate(ia, full);
              });
}

Var Tape::pairwise_diff(Var s) {
  int ia = check(s);
  const Matrix& v = nodes_[ia].value;
  require(v.cols() == 1, "tape: pairwise_diff expects a column vector");
  long m = v.rows();
  Matrix out = v.replicate(1, m) - v.transpose().replicate(m, 1);
  return emit(std::move(out), tracked(s), [ia](Tape& t, const Matrix& g) {
    Matrix ds = g.rowwise().sum() - g.colwise().sum().transpose();
    t.accumulate(ia, ds);
  });
}

Var Tape::zero_diag(Var a) {
  int ia = check(a);
  Matrix out = nodes_[ia].value;
  require(out.rows() == out.cols(), "tape: zero_diag expects a square matrix");
  out.diagonal().setZero();
  return emit(std::move(out), tracked(a), [ia](Tape& t, const Matrix& g) {
    Matrix gz = g;
    gz.diagonal().setZero();
    t.accumulate(ia, gz);
  });
}

void Tape::backward(Var output) {
  int io = check(output);
  require(!backward_done_, "tape: backward() already ran");
  require(nodes_[io].value.size() == 1, "tape: backward output must be 1x1");
  backward_done_ = true;
  Matrix seed(1, 1);
  seed(0, 0) = 1.0;
  nodes_[io].adjoint = seed;
  nodes_[io].has_adjoint = true;
  for (int i = io; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_adjoint || !n.pull) continue;
    n.pull(*this, n.adjoint);
    // The adjoint of an interior node is complete once processed.
    n.adjoint.resize(0, 0);
  }
}

Matrix Tape::grad(Var v) const {
  int iv = check(v);
  const Node& n = nodes_[iv];
  if (n.has_adjoint && n.adjoint.size() > 0) return n.adjoint;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

}  // namespace fedrecon::ad
