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

#ifndef FEDRECON_OBJECTIVE_HPP
#define FEDRECON_OBJECTIVE_HPP

#include <functional>
#include <memory>
#include <utility>

#include "fedrecon/linalg.hpp"

namespace fedrecon {

// A deterministic scalar objective with an exact gradient at any candidate
// point. Candidates are interaction vectors, optionally extended with a user
// embedding (the implementation does not care which).
class DifferentiableObjective {
 public:
  virtual ~DifferentiableObjective() = default;

  virtual int dim() const = 0;
  virtual double value(const Vector& point) const = 0;
  virtual std::pair<double, Vector> value_and_grad(const Vector& point) const = 0;
};

// Exact gradient with contract checks (dimension, finiteness).
Vector gradient(const DifferentiableObjective& objective, const Vector& point);

// Central finite differences, component-wise. Test oracle for gradient().
Vector finite_difference(const DifferentiableObjective& objective, const Vector& point, double h);

// Adapter for ad-hoc objectives (tests, toy problems).
class FunctionObjective : public DifferentiableObjective {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradFn = std::function<Vector(const Vector&)>;

  FunctionObjective(int dim, ValueFn value, GradFn grad)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

  int dim() const override { return dim_; }
  double value(const Vector& point) const override { return value_(point); }
  std::pair<double, Vector> value_and_grad(const Vector& point) const override {
    return {value_(point), grad_(point)};
  }

 private:
  int dim_;
  ValueFn value_;
  GradFn grad_;
};

}  // namespace fedrecon

#endif  // FEDRECON_OBJECTIVE_HPP
