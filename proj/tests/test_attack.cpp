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

#include "fedrecon/attack.hpp"

#include <cmath>

#include "doctest.h"
#include "fedrecon/metrics.hpp"
#include "fedrecon/rng.hpp"

using namespace fedrecon;

namespace {

Matrix random_features(int m, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

Vector random_binary(int m, std::uint64_t seed, double p = 0.5) {
  Rng rng(seed);
  Vector v(m);
  for (int i = 0; i < m; ++i) v[i] = rng.uniform() < p ? 1.0 : 0.0;
  return v;
}

Vector random_point(int m, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  Vector v(m);
  for (int i = 0; i < m; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

AttackConfig lbfgs_config(int epochs = 300) {
  AttackConfig cfg;
  cfg.optimizer.algorithm = OptAlgorithm::Lbfgs;
  cfg.optimizer.max_epochs = epochs;
  return cfg;
}

// The step must sit below the objective's curvature scale: 1e-5 suits the
// SGD-chain objectives, while differentiating through the inner Adam needs
// 1e-7 (its update has high third derivatives near small inner gradients).
void check_gradient_against_fd(const DifferentiableObjective& obj, const Vector& point,
                               double h = 1e-5, double tol = 1e-4) {
  Vector analytic = gradient(obj, point);
  Vector numeric = finite_difference(obj, point, h);
  CHECK(rel_linf_error(analytic, numeric) <= tol);
}

}  // namespace

TEST_CASE("objective gradients match finite differences: pointwise linear") {
  for (int trial = 0; trial < 5; ++trial) {
    RankerModel model = init_random(ModelSpec::linear(4), 100 + trial);
    Matrix x = random_features(4, 4, 200 + trial);
    Vector truth = random_binary(4, 300 + trial);
    LocalUpdate received = local_train_pointwise(model, x, truth, 0.1, 5);
    auto obj = make_pointwise_objective(model, x, received, 0.1, 5, 0.1);
    check_gradient_against_fd(*obj, random_point(4, 400 + trial));
  }
}

TEST_CASE("objective gradients match finite differences: pointwise MLP with clipping") {
  for (int trial = 0; trial < 5; ++trial) {
    RankerModel model = init_random(ModelSpec::mlp(5, {4}), 110 + trial);
    Matrix x = random_features(6, 5, 210 + trial);
    Vector truth = random_binary(6, 310 + trial);
    LocalUpdate received = local_train_pointwise(model, x, truth, 0.05, 5);
    auto obj = make_pointwise_objective(model, x, received, 0.05, 5, 0.05, 0.5);
    check_gradient_against_fd(*obj, random_point(6, 410 + trial));
  }
}

TEST_CASE("objective gradients match finite differences: pairwise multi-batch") {
  for (int trial = 0; trial < 5; ++trial) {
    RankerModel model = init_random(ModelSpec::mlp(6, {8}), 120 + trial);
    std::vector<Matrix> batches = {random_features(7, 6, 220 + trial),
                                   random_features(5, 6, 230 + trial)};
    std::vector<QueryBatch> qb;
    Vector truth(12);
    truth.head(7) = random_binary(7, 320 + trial);
    truth.tail(5) = random_binary(5, 330 + trial);
    qb.push_back({batches[0], truth.head(7)});
    qb.push_back({batches[1], truth.tail(5)});
    LocalUpdate received = local_train_pairwise(model, qb, 0.1);
    auto obj = make_pairwise_objective(model, batches, received, 0.1, 0.1);
    check_gradient_against_fd(*obj, random_point(12, 420 + trial));
  }
}

TEST_CASE("objective gradients match finite differences: joint NCF") {
  for (int trial = 0; trial < 3; ++trial) {
    NCFModel model = init_random_ncf(130 + trial);
    Matrix sample = 0.1 * random_features(5, NCFModel::kEmbeddingDim, 240 + trial);
    Vector truth = random_binary(5, 340 + trial);

    NcfTrainConfig train;
    train.epochs = 3;
    train.imia_defense_weight = trial == 2 ? 1.0 : 0.0;
    LocalUpdate received = local_train_ncf(model, sample, truth, train);

    auto obj = make_ncf_objective(model, sample, received, train, train.lr);
    Vector point(5 + NCFModel::kEmbeddingDim);
    point.head(5) = random_point(5, 440 + trial, 0.0, 1.0);
    point.tail(NCFModel::kEmbeddingDim) =
        random_point(NCFModel::kEmbeddingDim, 450 + trial, -0.1, 0.1);
    check_gradient_against_fd(*obj, point, 1e-7);
  }
}

TEST_CASE("reconstruct: strictly convex instance recovers the truth exactly") {
  // m <= d with iid features: rank condition holds, attack loss is strictly
  // convex, L-BFGS lands on the unique optimum.
  RankerModel model = init_random(ModelSpec::linear(8), 500);
  Matrix x = random_features(6, 8, 501);
  Vector truth = random_binary(6, 502);
  LocalUpdate received = local_train_pointwise(model, x, truth, 0.1, 5);
  auto obj = make_pointwise_objective(model, x, received, 0.1, 5, 0.1);

  ReconstructionResult res = reconstruct(*obj, 6, lbfgs_config(), 99);
  CHECK(linf_norm(res.interactions - truth) <= 1e-3);
  CHECK(auc(res.interactions, truth) == doctest::Approx(1.0));
  CHECK(res.final_loss <= 1e-8);

  // Rounding the optimizer output agrees with exhaustive search.
  Vector bf = brute_force(*obj, 6);
  for (int i = 0; i < 6; ++i) {
    CHECK((res.interactions[i] >= 0.5 ? 1.0 : 0.0) == bf[i]);
  }
}

TEST_CASE("reconstruct: degenerate zero-signal instance is flagged") {
  RankerModel model = init_random(ModelSpec::linear(4), 510);
  Matrix x = Matrix::Zero(5, 4);
  LocalUpdate received;
  received.kind = UpdateKind::DeltaParams;
  received.params = Vector::Zero(4);
  auto obj = make_pointwise_objective(model, x, received, 0.1, 5, 0.1);
  ReconstructionResult res = reconstruct(*obj, 5, lbfgs_config(), 7);
  CHECK(res.degenerate_at_init);
  CHECK(res.final_loss <= 1e-15);
  // I' = init: uniform [0,1) values, untouched.
  CHECK(res.interactions.minCoeff() >= 0.0);
  CHECK(res.interactions.maxCoeff() < 1.0);
}

TEST_CASE("oracle equivalence: rounded reconstruct equals brute force on convex instances") {
  int agree = 0;
  for (int trial = 0; trial < 50; ++trial) {
    RankerModel model = init_random(ModelSpec::linear(10), 600 + trial);
    Matrix x = random_features(7, 10, 700 + trial);
    Vector truth = random_binary(7, 800 + trial);
    LocalUpdate received = local_train_pointwise(model, x, truth, 0.1, 3);
    auto obj = make_pointwise_objective(model, x, received, 0.1, 3, 0.1);
    ReconstructionResult res = reconstruct(*obj, 7, lbfgs_config(), 900 + trial);
    Vector bf = brute_force(*obj, 7);
    bool same = true;
    for (int i = 0; i < 7; ++i) {
      same &= (res.interactions[i] >= 0.5 ? 1.0 : 0.0) == bf[i];
    }
    agree += same;
    CHECK(bf == truth);  // noiseless self-generated update: argmin is truth
  }
  CHECK(agree == 50);
}

TEST_CASE("closed_form_pointwise: identity-feature hand example") {
  LinearRanker lin;
  lin.weights = Vector::Zero(3);
  RankerModel model = lin;
  Matrix x = Matrix::Identity(3, 3);
  Vector received(3);
  received << -2, 0, -2;
  Vector solution = closed_form_pointwise(model, x, received);
  Vector expected(3);
  expected << 1, 0, 1;
  CHECK(linf_norm(solution - expected) <= 1e-12);
}

TEST_CASE("closed_form_pointwise: agrees with the optimizer route on random instances") {
  for (int trial = 0; trial < 10; ++trial) {
    RankerModel model = init_random(ModelSpec::linear(12), 1000 + trial);
    Matrix x = random_features(8, 12, 1100 + trial);
    Vector truth = random_binary(8, 1200 + trial);
    LocalUpdate received = simulate_pointwise_gradient(model, x, truth);

    Vector closed = closed_form_pointwise(model, x, received.params);
    CHECK(linf_norm(closed - truth) <= 1e-6);

    auto obj = make_pointwise_gradient_objective(model, x, received);
    ReconstructionResult res = reconstruct(*obj, 8, lbfgs_config(), 1300 + trial);
    CHECK(linf_norm(res.interactions - closed) <= 1e-3);
  }
}

TEST_CASE("closed_form_pointwise: more items than parameters fails the rank condition") {
  RankerModel model = init_random(ModelSpec::linear(4), 1400);
  Matrix x = random_features(9, 4, 1401);  // m=9 > p=4
  Vector received = Vector::Zero(4);
  CHECK_THROWS_AS(closed_form_pointwise(model, x, received), RankConditionError);

  // Duplicated items break invertibility even with m <= p.
  Matrix dup = random_features(3, 4, 1402);
  dup.row(2) = dup.row(1);
  CHECK_THROWS_AS(closed_form_pointwise(model, dup, Vector::Zero(4)), RankConditionError);
}

TEST_CASE("brute_force: m=1 evaluates both candidates; m>20 refused") {
  FunctionObjective pick_one(
      1, [](const Vector& v) { return (v[0] - 1.0) * (v[0] - 1.0); },
      [](const Vector&) { return Vector::Zero(1); });
  CHECK(brute_force(pick_one, 1)[0] == 1.0);

  FunctionObjective flat(
      21, [](const Vector&) { return 0.0; }, [](const Vector&) { return Vector::Zero(21); });
  CHECK_THROWS_AS(brute_force(flat, 21), ContractError);

  // Lexicographic tie-break: constant objective returns all zeros.
  FunctionObjective constant(
      3, [](const Vector&) { return 1.0; }, [](const Vector&) { return Vector::Zero(3); });
  CHECK(brute_force(constant, 3).isZero());
}

TEST_CASE("brute_force: LDP at epsilon 1 reduces recovery to chance") {
  DPConfig dp;
  dp.epsilon = 1.0;
  dp.delta = 1e-8;
  dp.sensitivity = 0.1;

  double total_auc = 0.0;
  int trials = 100;
  for (int t = 0; t < trials; ++t) {
    RankerModel model = init_random(ModelSpec::linear(10), 2000 + t);
    Matrix x = random_features(8, 10, 2100 + t);
    Vector truth = random_binary(8, 2200 + t);
    LocalUpdate received = local_train_pointwise(model, x, truth, 0.1, 3);
    received = clip_update(received, dp.sensitivity);
    Rng noise(substream(31337, t, Stream::DpNoise));
    received = gaussian_mechanism(received, dp, noise);

    auto obj = make_pointwise_objective(model, x, received, 0.1, 3, 0.1, dp.sensitivity);
    Vector guess = brute_force(*obj, 8);
    if (guess.sum() == 0.0 || guess.sum() == 8.0) {
      total_auc += 0.5;  // undefined AUC for a single-class guess: chance
    } else {
      total_auc += auc(guess, truth);
    }
  }
  CHECK(std::abs(total_auc / trials - 0.5) <= 0.1);
}

TEST_CASE("convexity_diagnostics: strictly convex when full rank, rank-deficient when m > p") {
  RankerModel model = init_random(ModelSpec::linear(9), 3000);
  Matrix x = random_features(6, 9, 3001);
  auto g = [&](const Vector& i_vec) {
    return simulate_pointwise_update(model, x, i_vec, 0.1, 5).params;
  };
  ConvexityReport report = convexity_diagnostics(g, random_point(6, 3002, 0.0, 1.0));
  CHECK(report.applicable);
  CHECK(report.affinity_residual <= 1e-8);
  CHECK(report.min_eigenvalue >= -1e-8);
  CHECK(report.gradient_rank == 6);
  CHECK(report.strictly_convex);

  Matrix wide = random_features(12, 9, 3003);  // m=12 > p=9
  auto g2 = [&](const Vector& i_vec) {
    return simulate_pointwise_update(model, wide, i_vec, 0.1, 5).params;
  };
  ConvexityReport rank_deficient = convexity_diagnostics(g2, random_point(12, 3004, 0.0, 1.0));
  CHECK(rank_deficient.applicable);
  CHECK(rank_deficient.gradient_rank < 12);
  CHECK(!rank_deficient.strictly_convex);
}

TEST_CASE("convexity_diagnostics: pairwise g fails the affinity probe") {
  RankerModel model = init_random(ModelSpec::linear(6), 3100);
  std::vector<Matrix> batches = {random_features(5, 6, 3101)};
  auto g = [&](const Vector& i_vec) {
    return simulate_pairwise_update(model, batches, i_vec, 0.1).params;
  };
  ConvexityReport report = convexity_diagnostics(g, random_point(5, 3102, 0.0, 1.0));
  CHECK(!report.applicable);
  CHECK(report.affinity_residual > 1e-8);
}

TEST_CASE("reconstruct_rs: oracle embedding at init recovers perfectly") {
  // Received updates generated with known e_u; attack initialized elsewhere
  // still solves the joint problem on this small instance.
  NCFModel model = init_random_ncf(4000);
  Matrix sample = 0.1 * random_features(10, NCFModel::kEmbeddingDim, 4001);
  Vector truth = random_binary(10, 4002, 0.25);
  truth[0] = 1.0;  // guarantee both classes
  truth[1] = 0.0;

  NcfTrainConfig train;
  train.epochs = 10;
  LocalUpdate received = local_train_ncf(model, sample, truth, train);

  auto obj = make_ncf_objective(model, sample, received, train, train.lr);
  AttackConfig cfg = lbfgs_config(400);
  ReconstructionResult res = reconstruct_rs(*obj, 10, NCFModel::kEmbeddingDim, cfg, 4003);
  REQUIRE(res.user_embedding.has_value());
  CHECK(auc(res.interactions, truth) == doctest::Approx(1.0));
}

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  cfg.rounding_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = AttackConfig{};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}
