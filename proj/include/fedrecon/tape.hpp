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

#ifndef FEDRECON_TAPE_HPP
#define FEDRECON_TAPE_HPP

#include <functional>
#include <vector>

#include "fedrecon/linalg.hpp"

namespace fedrecon::ad {

// Handle into a Tape. Plain index so tapes can grow without invalidating
// handles.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. One tape records one evaluation;
// backward() runs the adjoint sweep from a 1x1 output. Local FL training
// loops are recorded op by op, which is what makes the simulated update
// differentiable with respect to the candidate interactions.
//
// Gradient conventions worth noting:
//   * step_mask() and sign() expose the piecewise-constant factors of ReLU
//     and L1 backpropagation; both have zero derivative almost everywhere
//     and propagate nothing.
//   * cmax_scalar uses the subgradient 1[x > c].
class Tape {
 public:
  // Tracked leaf: grad() is defined for it after backward().
  Var input(Matrix v);
  // Untracked leaf; gradient flow stops here.
  Var constant(Matrix v);
  Var constant_scalar(double v);

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var cmul(Var a, Var b);
  Var cdiv(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  // Elementwise product of a matrix node by a 1x1 scalar node.
  Var scale_by(Var m, Var s);

  Var relu(Var a);
  Var step_mask(Var a);  // 1[x > 0], zero gradient
  Var sign(Var a);       // zero gradient
  Var abs(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var sqrt(Var a);
  Var cmax_scalar(Var a, double c);

  Var sum(Var a);   // 1x1
  Var mean(Var a);  // 1x1
  Var sum_squares(Var a);
  Var row_sums(Var a);                  // m x n -> m x 1
  Var col_sums(Var a);                  // m x n -> 1 x n
  Var replicate_rows(Var row, int m);   // 1 x n -> m x n
  Var hcat(Var a, Var b);
  Var block(Var a, int r0, int c0, int rows, int cols);
  Var pairwise_diff(Var s);  // m x 1 -> m x m with D(i,j) = s_i - s_j
  Var zero_diag(Var a);

  // Adjoint sweep from a 1x1 output. May be called once per tape.
  void backward(Var output);
  // Gradient of the backward() output w.r.t. a tracked leaf (or any node).
  Matrix grad(Var v) const;

 private:
  using Pull = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix adjoint;
    Pull pull;  // empty for leaves / untracked nodes
    bool tracked = false;
    bool has_adjoint = false;
  };

  int check(Var v) const;
  Var emit(Matrix value, bool tracked, Pull pull);
  void accumulate(int id, const Matrix& g);
  bool tracked(Var v) const { return nodes_[check(v)].tracked; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace fedrecon::ad

#endif  // FEDRECON_TAPE_HPP
