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

#ifndef FEDRECON_FL_HPP
#define FEDRECON_FL_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fedrecon/clicks.hpp"
#include "fedrecon/data.hpp"
#include "fedrecon/models.hpp"
#include "fedrecon/rng.hpp"

namespace fedrecon {

// --- local updates -------------------------------------------------------------

enum class UpdateKind { DeltaParams, RawGradient };

struct LocalUpdate {
  UpdateKind kind = UpdateKind::DeltaParams;
  Vector params;
  // RS scenario: per-sampled-item embedding update (rows follow the sample).
  std::optional<Matrix> item_embedding_delta;

  double joint_norm() const;
};

// User-mode consumes hard {0,1} interactions and runs the original
// algorithm; attacker-mode accepts continuous relaxations.
enum class InteractionMode { User, Attacker };

struct QueryBatch {
  Matrix features;      // (items x d), at most 10 rows in the FPDGD setting
  Vector interactions;  // clicks, parallel to rows
};

// --- local training algorithms ---------------------------------------------------

// Full-batch gradient descent on ||I - f(X, theta)||^2 / m. Returns
// theta_hat - theta.
LocalUpdate local_train_pointwise(const RankerModel& model, const Matrix& features,
                                  const Vector& interactions, double lr, int epochs,
                                  InteractionMode mode = InteractionMode::User);

// Multi-batch SGD, one step per query batch in order. The batch loss is
// sum_{ij} W_ij * softplus(-(s_i - s_j)) with W = I (1 - I^T), zero diagonal;
// for hard clicks that is exactly the sum over (clicked, unclicked) pairs.
LocalUpdate local_train_pairwise(const RankerModel& model, const std::vector<QueryBatch>& batches,
                                 double lr, InteractionMode mode = InteractionMode::User);

struct NcfTrainConfig {
  double lr = 0.001;
  int epochs = 20;
  // L1 pull of the updated item embeddings toward the global ones; 1.0 when
  // the defense is on.
  double imia_defense_weight = 0.0;

  // Adam internals. sqrt_guard keeps the square root differentiable at zero
  // second moment; it is part of the update formula in both modes so user and
  // attacker runs agree bit-for-bit in structure.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double sqrt_guard = 1e-16;
};

// Joint Adam training of the scoring MLP, the private user embedding and the
// sampled items' embeddings against binary cross-entropy. The returned update
// holds the MLP delta and the per-item embedding delta; the user embedding
// stays private. `labels` may be continuous in attacker mode.
LocalUpdate local_train_ncf(const NCFModel& model, const Matrix& sample_embeddings,
                            const Vector& labels, const NcfTrainConfig& config,
                            InteractionMode mode = InteractionMode::User);

// --- attacker-side simulations (tape-backed, continuous interactions) -------------
//
// These rerun the algorithms above as differentiable programs. They exist so
// the reconstruction objectives can differentiate through the simulated local
// training; evaluated at hard {0,1} interactions they agree with the
// user-mode implementations.

LocalUpdate simulate_pointwise_update(const RankerModel& model, const Matrix& features,
                                      const Vector& interactions, double lr, int epochs);

// The single-gradient pointwise form: g = grad_theta ||I - f(X, theta)||^2
// (unnormalized), returned as a raw gradient. This is the closed-form
// solver's setting.
LocalUpdate simulate_pointwise_gradient(const RankerModel& model, const Matrix& features,
                                        const Vector& interactions);

LocalUpdate simulate_pairwise_update(const RankerModel& model,
                                     const std::vector<Matrix>& batch_features,
                                     const Vector& interactions_concat, double lr);

LocalUpdate simulate_ncf_update(const NCFModel& model, const Matrix& sample_embeddings,
                                const Vector& labels, const Vector& user_embedding,
                                const NcfTrainConfig& config);

// --- local differential privacy ----------------------------------------------------

enum class DpMechanism { ClassicalGaussian, AnalyticGaussian };

struct DPConfig {
  double epsilon = std::numeric_limits<double>::infinity();
  double delta = 0.0;
  double sensitivity = 0.0;  // L2 clipping bound
  DpMechanism mechanism = DpMechanism::ClassicalGaussian;

  bool enabled() const { return std::isfinite(epsilon); }
  void validate() const;
};

// Scales the update into the L2 ball of radius `sensitivity`. The parameter
// vector and the RS embedding delta are clipped jointly (one ball).
LocalUpdate clip_update(const LocalUpdate& update, double sensitivity);

// Classical Gaussian: sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon.
// Analytic Gaussian (epsilon > 1 only): smallest sigma with
// Phi(s/(2 sigma) - eps sigma/s) - e^eps Phi(-s/(2 sigma) - eps sigma/s) <= delta,
// found by bisection to relative 1e-9.
double calibrate_sigma(double epsilon, double delta, double sensitivity, DpMechanism mechanism);

// Adds iid N(0, sigma^2) noise to a clipped update; identity at epsilon = inf.
LocalUpdate gaussian_mechanism(const LocalUpdate& update, const DPConfig& config, Rng& rng);

// Coordinate-wise sum. In SA scenarios the attack sees only this output.
LocalUpdate secure_aggregate(const std::vector<LocalUpdate>& updates);

// --- federated training / utility ---------------------------------------------------

struct FlTrainConfig {
  int users_per_round = 100;
  int rounds = 10;
  double lr = 0.1;
  DPConfig dp;
  double attacked_fraction = 0.0;  // fraction of users receiving noise features
  double adm_noise_sigma = 0.1;
  ClickChainModel click_model = ClickChainModel::informational();
  int max_items_per_query = 10;
  std::uint64_t seed = 0;
};

struct FlTrainResult {
  RankerModel model;
  std::vector<double> ndcg_trace;  // [0] = initial model, one entry per round after
};

// Pairwise federated training over the train split; every user contributes
// one query batch per round, updates are averaged. NDCG@10 on the test split
// is recorded before training and after every round.
FlTrainResult run_fl_training(const LtrSplit& data, const ModelSpec& spec,
                              const FlTrainConfig& config);

double mean_ndcg_at_10(const RankerModel& model, const LtrDataset& test);

// Plackett-Luce sampling of up to k items proportional to softmax(scores)
// (Gumbel top-k), without replacement.
std::vector<int> softmax_sample_items(const Vector& scores, int k, Rng& rng);

// Splits a flat parameter vector into the per-tensor segments of `model`
// (weights/biases per layer, in flatten order).
std::vector<Matrix> split_parameter_segments(const RankerModel& model, const Vector& flat);

}  // namespace fedrecon

#endif  // FEDRECON_FL_HPP
