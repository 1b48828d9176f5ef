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

#ifndef FEDRECON_OPTIM_HPP
#define FEDRECON_OPTIM_HPP

#include <vector>

#include "fedrecon/objective.hpp"

namespace fedrecon {

enum class OptAlgorithm { Adam, Lbfgs };

struct OptimizerConfig {
  OptAlgorithm algorithm = OptAlgorithm::Lbfgs;
  double learning_rate = 0.1;  // Adam step size; L-BFGS initial trial step is 1
  int max_epochs = 500;
  // Updates (received and simulated) are divided by this before matching,
  // normally the local FL learning rate. Consumed by objective builders.
  double grad_scale_divisor = 1.0;
  double grad_tolerance = 1e-7;      // stop when grad L-inf falls below
  double rel_loss_tolerance = 1e-9;  // stop on relative loss stagnation

  // Adam moment parameters. The usual defaults; nothing in the attack is
  // sensitive to them.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  int lbfgs_history = 10;

  void validate() const;
};

struct MinimizeResult {
  Vector point;                   // best iterate found
  std::vector<double> loss_trace; // loss after each accepted epoch, [0] = init
  int epochs = 0;
};

// Minimizes the objective from `init`. The returned point never has a higher
// loss than `init`. Throws NumericError (carrying the last finite iterate)
// when the objective turns non-finite.
MinimizeResult minimize(const DifferentiableObjective& objective, const Vector& init,
                        const OptimizerConfig& config);

}  // namespace fedrecon

#endif  // FEDRECON_OPTIM_HPP
