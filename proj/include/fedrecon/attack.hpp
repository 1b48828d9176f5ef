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

#ifndef FEDRECON_ATTACK_HPP
#define FEDRECON_ATTACK_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fedrecon/fl.hpp"
#include "fedrecon/models.hpp"
#include "fedrecon/objective.hpp"
#include "fedrecon/optim.hpp"

namespace fedrecon {

struct AttackConfig {
  OptimizerConfig optimizer;
  double rounding_threshold = 0.5;  // hard labels for F1
  int restarts = 1;
  // Optional quadratic prior pulling interactions toward 0.5; 0 = the
  // uninformative default.
  double prior_weight = 0.0;

  void validate() const;
};

struct ReconstructionResult {
  Vector interactions;  // raw values; serve directly as ranking scores
  std::optional<Vector> user_embedding;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
  double wall_ms = 0.0;
  // Loss was already ~0 at the random init: the instance carries no signal
  // (zero features / zero update) and the returned vector is the init.
  bool degenerate_at_init = false;
};

// --- matching objectives -------------------------------------------------------
//
// Each factory captures (theta, X', received update, protocol settings) and
// yields the attack loss over candidate interactions: the squared L2 distance
// between the received update and the one simulated by rerunning local
// training, both divided by `divisor` (normally the local learning rate).
// When `clip_norm` is set the simulated update passes through the same L2
// clipping the protocol applied to the received one.

std::unique_ptr<DifferentiableObjective> make_pointwise_objective(
    const RankerModel& model, const Matrix& features, const LocalUpdate& received, double lr,
    int epochs, double divisor, std::optional<double> clip_norm = std::nullopt,
    double prior_weight = 0.0);

// Single-gradient pointwise form (raw-gradient updates; closed-form setting).
std::unique_ptr<DifferentiableObjective> make_pointwise_gradient_objective(
    const RankerModel& model, const Matrix& features, const LocalUpdate& received);

std::unique_ptr<DifferentiableObjective> make_pairwise_objective(
    const RankerModel& model, const std::vector<Matrix>& batch_features,
    const LocalUpdate& received, double lr, double divisor,
    std::optional<double> clip_norm = std::nullopt, double prior_weight = 0.0);

// Joint (interactions, user embedding) objective; candidate layout is
// [interactions; embedding]. Adds the mean per-item embedding matching term.
std::unique_ptr<DifferentiableObjective> make_ncf_objective(
    const NCFModel& model, const Matrix& sample_embeddings, const LocalUpdate& received,
    const NcfTrainConfig& train_config, double divisor,
    std::optional<double> clip_norm = std::nullopt, double prior_weight = 0.0);

// --- reconstruction ---------------------------------------------------------------

// Minimizes the objective from uniform-[0,1) initial interactions.
ReconstructionResult reconstruct(const DifferentiableObjective& objective, int num_items,
                                 const AttackConfig& config, std::uint64_t seed);

// Joint variant: candidate = [interactions; embedding], embedding initialized
// uniform on [-0.1, 0.1].
ReconstructionResult reconstruct_rs(const DifferentiableObjective& objective, int num_items,
                                    int embedding_dim, const AttackConfig& config,
                                    std::uint64_t seed);

// Closed-form solution of the single-gradient pointwise instance:
//   I' = f(X, theta) - 1/2 (J J^T)^{-1} J g_received,  J = df/dtheta (m x p).
// Requires rank(J) = m; a Gram condition number above 1e12 is rejected.
Vector closed_form_pointwise(const RankerModel& model, const Matrix& features,
                             const Vector& received_gradient);

// Exhaustive argmin of the objective over {0,1}^m (m <= 20). Ties break
// toward the lexicographically smallest vector.
Vector brute_force(const DifferentiableObjective& objective, int num_items);

// --- convexity diagnostics -----------------------------------------------------------

// Flat simulated update as a function of candidate interactions.
using UpdateSimulator = std::function<Vector(const Vector&)>;

struct ConvexityReport {
  // False when the affinity probe failed: g is not affine in the
  // interactions there, so the closed Hessian form 2 J J^T does not apply.
  bool applicable = false;
  double affinity_residual = 0.0;
  double min_eigenvalue = 0.0;
  int gradient_rank = 0;
  bool strictly_convex = false;
};

// Probes g for affinity in the interactions (second differences along random
// directions); when affine, forms the attack-loss Hessian 2 J J^T exactly and
// reports its smallest eigenvalue and the rank of J.
ConvexityReport convexity_diagnostics(const UpdateSimulator& simulator, const Vector& point,
                                      double probe_tolerance = 1e-8);

}  // namespace fedrecon

#endif  // FEDRECON_ATTACK_HPP
