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

#ifndef FEDRECON_LINALG_HPP
#define FEDRECON_LINALG_HPP

#include <string>

#include <Eigen/Core>

#include "fedrecon/error.hpp"

namespace fedrecon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& stage) {
  if (!m.allFinite()) {
    throw NumericError("non-finite values in " + stage);
  }
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractError(what);
}

inline double linf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Relative L-infinity distance with an absolute floor, used by the gradient
// checks: max_i |a_i - b_i| / max(1, |a|_inf, |b|_inf).
inline double rel_linf_error(const Vector& a, const Vector& b) {
  double scale = std::max({1.0, linf_norm(a), linf_norm(b)});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace fedrecon

#endif  // FEDRECON_LINALG_HPP
