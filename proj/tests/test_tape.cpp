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

#include "doctest.h"
#include "fedrecon/objective.hpp"
#include "fedrecon/rng.hpp"

using namespace fedrecon;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Wraps a tape program as an objective over a single flattened leaf so the
// generic finite-difference oracle can exercise it.
class TapeProgramObjective : public DifferentiableObjective {
 public:
  using Program = std::function<ad::Var(ad::Tape&, ad::Var)>;
  TapeProgramObjective(int rows, int cols, Program program)
      : rows_(rows), cols_(cols), program_(std::move(program)) {}

  int dim() const override { return rows_ * cols_; }
  double value(const Vector& x) const override {
    ad::Tape tape;
    ad::Var leaf = tape.input(Eigen::Map<const Matrix>(x.data(), rows_, cols_));
    return tape.scalar(program_(tape, leaf));
  }
  std::pair<double, Vector> value_and_grad(const Vector& x) const override {
    ad::Tape tape;
    ad::Var leaf = tape.input(Eigen::Map<const Matrix>(x.data(), rows_, cols_));
    ad::Var out = program_(tape, leaf);
    double loss = tape.scalar(out);
    tape.backward(out);
    Matrix g = tape.grad(leaf);
    return {loss, Eigen::Map<const Vector>(g.data(), g.size())};
  }

 private:
  int rows_, cols_;
  Program program_;
};

void check_against_fd(const TapeProgramObjective& obj, const Vector& x, double tol = 1e-6) {
  Vector analytic = gradient(obj, x);
  Vector numeric = finite_difference(obj, x, 1e-6);
  CHECK(rel_linf_error(analytic, numeric) <= tol);
}

}  // namespace

TEST_CASE("tape: forward values for basic ops") {
  ad::Tape tape;
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  ad::Var va = tape.input(a);
  CHECK(tape.value(tape.transpose(va))(0, 1) == 3);
  CHECK(tape.scalar(tape.sum(va)) == 10);
  CHECK(tape.scalar(tape.mean(va)) == doctest::Approx(2.5));
  CHECK(tape.value(tape.relu(tape.add_scalar(va, -2.5)))(0, 0) == 0.0);
  CHECK(tape.value(tape.softplus(tape.constant(Matrix::Zero(1, 1))))(0, 0) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("tape: matmul chain gradient matches finite differences") {
  Rng rng(7);
  Matrix b = random_matrix(3, 2, rng);
  TapeProgramObjective obj(4, 3, [b](ad::Tape& t, ad::Var x) {
    ad::Var vb = t.constant(b);
    return t.sum_squares(t.matmul(x, vb));
  });
  Vector x(12);
  for (int i = 0; i < 12; ++i) x[i] = rng.normal();
  check_against_fd(obj, x);
}

TEST_CASE("tape: elementwise and reduction gradients") {
  Rng rng(11);
  TapeProgramObjective obj(3, 3, [](ad::Tape& t, ad::Var x) {
    ad::Var s = t.sigmoid(x);
    ad::Var sp = t.softplus(t.neg(x));
    ad::Var mix = t.cmul(s, sp);
    ad::Var q = t.cdiv(mix, t.add_scalar(t.square(x), 1.0));
    return t.mean(q);
  });
  Vector x(9);
  for (int i = 0; i < 9; ++i) x[i] = rng.normal();
  check_against_fd(obj, x);
}

TEST_CASE("tape: sqrt/exp/log/abs gradients") {
  Rng rng(13);
  TapeProgramObjective obj(2, 3, [](ad::Tape& t, ad::Var x) {
    ad::Var pos = t.add_scalar(t.square(x), 0.5);
    ad::Var r = t.sqrt(pos);
    ad::Var e = t.exp(t.scale(x, 0.3));
    ad::Var l = t.log(pos);
    return t.sum(t.add(t.cmul(r, e), t.add(l, t.abs(x))));
  });
  Vector x(6);
  for (int i = 0; i < 6; ++i) x[i] = rng.normal() + 2.0;  // keep abs away from the kink
  check_against_fd(obj, x);
}

TEST_CASE("tape: pairwise_diff, zero_diag, hcat, block, replicate") {
  Rng rng(17);
  Matrix w = random_matrix(4, 1, rng);
  TapeProgramObjective obj(4, 1, [w](ad::Tape& t, ad::Var x) {
    ad::Var d = t.pairwise_diff(x);
    ad::Var zd = t.zero_diag(t.softplus(t.neg(d)));
    ad::Var cat = t.hcat(x, t.constant(w));
    ad::Var blk = t.block(cat, 0, 0, 4, 1);
    ad::Var rep = t.replicate_rows(t.transpose(blk), 3);
    return t.add(t.sum(zd), t.sum_squares(rep));
  });
  Vector x(4);
  for (int i = 0; i < 4; ++i) x[i] = rng.normal();
  check_against_fd(obj, x);
}

TEST_CASE("tape: row/col sums, scale_by and cmax gradients") {
  Rng rng(19);
  TapeProgramObjective obj(3, 4, [](ad::Tape& t, ad::Var x) {
    ad::Var rs = t.row_sums(x);
    ad::Var cs = t.col_sums(x);
    ad::Var norm = t.sqrt(t.add_scalar(t.sum_squares(x), 1e-12));
    ad::Var capped = t.cmax_scalar(norm, 0.5);
    ad::Var scaled = t.scale_by(rs, capped);
    return t.add(t.sum_squares(scaled), t.sum_squares(cs));
  });
  Vector x(12);
  for (int i = 0; i < 12; ++i) x[i] = rng.normal();
  check_against_fd(obj, x);
}

TEST_CASE("tape: step_mask and sign block gradient flow") {
  ad::Tape tape;
  Matrix a(2, 1);
  a << 1.5, -0.5;
  ad::Var x = tape.input(a);
  ad::Var masked = tape.cmul(tape.step_mask(x), tape.square(x));
  ad::Var out = tape.sum(masked);
  tape.backward(out);
  Matrix g = tape.grad(x);
  // Only the pass-through square contributes; the mask itself is constant.
  CHECK(g(0, 0) == doctest::Approx(3.0));
  CHECK(g(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("tape: constants receive no gradient and handles are checked") {
  ad::Tape tape;
  ad::Var c = tape.constant(Matrix::Ones(2, 2));
  ad::Var x = tape.input(Matrix::Ones(2, 2));
  ad::Var out = tape.sum(tape.cmul(c, x));
  tape.backward(out);
  CHECK(tape.grad(c).isZero());
  CHECK(tape.grad(x).isApprox(Matrix::Ones(2, 2)));
  CHECK_THROWS_AS(tape.value(ad::Var{}), ContractError);
}
