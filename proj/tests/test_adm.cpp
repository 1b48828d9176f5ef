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

#include "fedrecon/adm.hpp"

#include <cmath>

#include "doctest.h"
#include "fedrecon/fl.hpp"
#include "fedrecon/rng.hpp"

using namespace fedrecon;

TEST_CASE("apply_plan: keep is identity, zero blanks, noise matches its distribution") {
  Rng rng(3);
  Matrix x(250, 4);
  for (int i = 0; i < 250; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();

  CHECK(apply_plan(x, ADMPlan::all_keep(4)) == x);

  Matrix zeroed = apply_plan(x, ADMPlan::zero_features({2}, 4));
  CHECK(zeroed.col(2).isZero());
  CHECK(zeroed.col(0) == x.col(0));

  ADMPlan noise = ADMPlan::all_noise(4, 0.0, 0.1, 77);
  Matrix noisy = apply_plan(x, noise);
  for (int j = 0; j < 4; ++j) {
    double mean = noisy.col(j).mean();
    double sd = std::sqrt((noisy.col(j).array() - mean).square().mean());
    CHECK(std::abs(sd - 0.1) <= 0.01);  // within 10% for m >= 200
  }

  // Re-expansion with the same seed reproduces identical noise.
  CHECK(apply_plan(x, noise) == noisy);
}

TEST_CASE("ADMPlan::fraction_noise: exact counting and determinism") {
  ADMPlan half = ADMPlan::fraction_noise(46, 0.5, 0.0, 0.1, 9);
  int manipulated = 0;
  for (const auto& a : half.actions) manipulated += a.kind != FeatureAction::Kind::Keep;
  CHECK(manipulated == 23);
  CHECK(half.manipulated_fraction() == doctest::Approx(0.5));

  ADMPlan again = ADMPlan::fraction_noise(46, 0.5, 0.0, 0.1, 9);
  for (int j = 0; j < 46; ++j) CHECK(again.actions[j].kind == half.actions[j].kind);

  CHECK(ADMPlan::fraction_noise(10, 0.0, 0, 0.1, 1).manipulated_fraction() == 0.0);
  CHECK(ADMPlan::fraction_noise(10, 1.0, 0, 0.1, 1).manipulated_fraction() == 1.0);
}

TEST_CASE("build_sa_bypass: the worked 3-user/6-feature table") {
  SABypassPlan plan = build_sa_bypass(3, 6, 1, {3, 4, 5});
  // Target user: d1..d3 zeroed, d4..d6 kept.
  for (int j : {0, 1, 2}) CHECK(plan.plan_for(1).actions[j].kind == FeatureAction::Kind::Zero);
  for (int j : {3, 4, 5}) CHECK(plan.plan_for(1).actions[j].kind == FeatureAction::Kind::Keep);
  // Everyone else: d4..d6 zeroed.
  for (int u : {0, 2}) {
    for (int j : {0, 1, 2}) CHECK(plan.plan_for(u).actions[j].kind == FeatureAction::Kind::Keep);
    for (int j : {3, 4, 5}) CHECK(plan.plan_for(u).actions[j].kind == FeatureAction::Kind::Zero);
  }

  // Single user: target plan only.
  SABypassPlan solo = build_sa_bypass(1, 4, 0, {0, 1});
  CHECK(solo.per_user.size() == 1);

  // D = the entire feature space is legal; noise option fills D with noise.
  SABypassPlan full = build_sa_bypass(2, 3, 0, {0, 1, 2}, true, 0.1, 5);
  for (int j = 0; j < 3; ++j) {
    CHECK(full.plan_for(0).actions[j].kind == FeatureAction::Kind::Noise);
    CHECK(full.plan_for(1).actions[j].kind == FeatureAction::Kind::Zero);
  }
}

TEST_CASE("sa bypass: aggregated sum equals the target's update on feature parameters") {
  // No DP: other users' updates vanish on every feature weight, so the sum
  // leaks the target exactly (linear ranker has only feature weights).
  RankerModel model = init_random(ModelSpec::linear(6), 71);
  SABypassPlan plan = build_sa_bypass(4, 6, 2, {0, 1, 2, 3, 4, 5}, true, 0.1, 13);

  Rng rng(14);
  std::vector<LocalUpdate> updates;
  LocalUpdate target_update;
  for (int u = 0; u < 4; ++u) {
    Matrix x(8, 6);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 6; ++j) x(i, j) = rng.normal();
    Matrix manipulated = apply_plan(x, plan.plan_for(u));
    QueryBatch batch;
    batch.features = manipulated;
    batch.interactions = Vector::Zero(8);
    for (int i = 0; i < 8; ++i) batch.interactions[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    LocalUpdate update = local_train_pairwise(model, {batch}, 0.1);
    if (u == 2) target_update = update;
    updates.push_back(std::move(update));
  }

  LocalUpdate sum = secure_aggregate(updates);
  CHECK(linf_norm(sum.params - target_update.params) <= 1e-12);
}

TEST_CASE("grid_search_noise: trivial candidate, determinism, tie-break") {
  auto fake = [](double sigma, std::uint64_t seed) {
    Rng rng(seed);
    return 0.6 + 0.3 * std::exp(-std::abs(sigma - 0.1)) + 0.0 * rng.uniform();
  };
  GridSearchResult single = grid_search_noise(fake, {0.25}, 3, 1);
  CHECK(single.best_sigma == 0.25);
  CHECK(single.mean_auc.size() == 1);

  GridSearchResult multi = grid_search_noise(fake, {1e-6, 0.1, 0.5}, 5, 2);
  CHECK(multi.best_sigma == 0.1);
  GridSearchResult again = grid_search_noise(fake, {1e-6, 0.1, 0.5}, 5, 2);
  CHECK(again.best_sigma == multi.best_sigma);
  CHECK(again.mean_auc == multi.mean_auc);

  auto flat = [](double, std::uint64_t) { return 0.7; };
  CHECK(grid_search_noise(flat, {0.5, 0.01, 0.2}, 2, 3).best_sigma == 0.01);
}

TEST_CASE("SyntheticExtractor: frozen, deterministic, non-negative") {
  SyntheticExtractor ex(16, 32, 8, 42);
  Rng rng(1);
  Vector raw(16);
  for (int i = 0; i < 16; ++i) raw[i] = rng.normal();
  Vector f1 = ex.extract(raw);
  SyntheticExtractor same(16, 32, 8, 42);
  CHECK(same.extract(raw) == f1);
  CHECK(f1.minCoeff() >= 0.0);
  CHECK(ex.extract_rows(raw.transpose()).row(0).transpose() == f1);
}

TEST_CASE("indirect_manipulate: already-matching target returns the input unchanged") {
  SyntheticExtractor ex(12, 24, 6, 7);
  Rng rng(2);
  Vector input(12);
  for (int i = 0; i < 12; ++i) input[i] = rng.normal();
  Vector target = ex.extract(input);
  CHECK(indirect_manipulate(ex, input, target) == input);
  CHECK(indirect_manipulate(ex, input, target.cwiseMax(0.0), 0.01, 0) == input);
}

TEST_CASE("indirect_manipulate: strictly reduces the objective on random pairs") {
  SyntheticExtractor ex(16, 32, 8, 11);
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    Vector input(16);
    for (int i = 0; i < 16; ++i) input[i] = rng.normal();
    Vector target(8);
    for (int i = 0; i < 8; ++i) target[i] = std::max(0.0, rng.normal(0.0, 4.0));
    double before = (ex.extract(input) - target).squaredNorm();
    Vector manipulated = indirect_manipulate(ex, input, target, 0.01, 500);
    double after = (ex.extract(manipulated) - target).squaredNorm();
    CHECK(after < before);
  }
}

TEST_CASE("indirect_manipulate: rejects negative targets") {
  SyntheticExtractor ex(8, 16, 4, 3);
  Vector input = Vector::Zero(8);
  Vector target(4);
  target << 1, -0.5, 0, 2;
  CHECK_THROWS_AS(indirect_manipulate(ex, input, target), ContractError);
}

TEST_CASE("partition_targets: definition, reassembly, odd length") {
  Vector t(4);
  t << 1, 2, 3, 4;
  auto [a, b] = partition_targets(t);
  Vector ea(4), eb(4);
  ea << 0, 0, 3, 4;
  eb << 1, 2, 0, 0;
  CHECK(a == ea);
  CHECK(b == eb);
  CHECK(a + b == t);

  Vector odd(5);
  odd << 1, 2, 3, 4, 5;
  auto [oa, ob] = partition_targets(odd);
  CHECK(oa.head(2).isZero());  // first half = floor(5/2)
  CHECK(ob.tail(3).isZero());
  CHECK(oa + ob == odd);
}

TEST_CASE("partition + indirect manipulation yields near-disjoint feature supports") {
  SyntheticExtractor ex(24, 48, 10, 17);
  Rng rng(5);
  Vector input(24);
  for (int i = 0; i < 24; ++i) input[i] = rng.normal();
  Vector target(10);
  for (int i = 0; i < 10; ++i) target[i] = std::max(0.0, rng.normal(0.0, 4.0));

  auto [ta, tb] = partition_targets(target);
  Vector va = indirect_manipulate(ex, input, ta, 0.01, 5000);
  Vector vb = indirect_manipulate(ex, input, tb, 0.01, 5000);
  Vector fa = ex.extract(va);
  Vector fb = ex.extract(vb);
  // Version A was pushed toward zero on the first half, version B on the
  // second: supports separate up to the optimization tolerance.
  CHECK(fa.head(5).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(fb.tail(5).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK((fa - ta).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK((fb - tb).cwiseAbs().maxCoeff() <= 1e-3);
}
