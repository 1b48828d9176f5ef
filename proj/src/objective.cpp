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

#include "fedrecon/objective.hpp"

#include <cmath>

namespace fedrecon {

Vector gradient(const DifferentiableObjective& objective, const Vector& point) {
  if (point.size() != objective.dim()) {
    throw ContractError("gradient: point dimension " + std::to_string(point.size()) +
                        " does not match objective dimension " +
                        std::to_string(objective.dim()));
  }
  auto [loss, grad] = objective.value_and_grad(point);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in objective evaluation");
  if (!grad.allFinite()) throw NumericError("non-finite gradient in objective evaluation");
  if (grad.size() != point.size()) {
    throw ContractError("gradient: objective returned gradient of wrong length");
  }
  return grad;
}

Vector finite_difference(const DifferentiableObjective& objective, const Vector& point,
                         double h) {
  require(h > 0, "finite_difference: h must be positive");
  require(point.size() == objective.dim(), "finite_difference: dimension mismatch");
  Vector g(point.size());
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    double orig = x[i];
    x[i] = orig + h;
    double fp = objective.value(x);
    x[i] = orig - h;
    double fm = objective.value(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace fedrecon
