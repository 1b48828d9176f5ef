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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedrecon/rng.hpp"

namespace fedrecon {

double ADMPlan::manipulated_fraction() const {
  if (actions.empty()) return 0.0;
  long manipulated = std::count_if(actions.begin(), actions.end(), [](const FeatureAction& a) {
    return a.kind != FeatureAction::Kind::Keep;
  });
  return static_cast<double>(manipulated) / static_cast<double>(actions.size());
}

ADMPlan ADMPlan::all_keep(int d) {
  ADMPlan p;
  p.actions.assign(d, FeatureAction{});
  return p;
}

ADMPlan ADMPlan::all_noise(int d, double mu, double sigma, std::uint64_t seed) {
  ADMPlan p;
  p.actions.assign(d, FeatureAction{FeatureAction::Kind::Noise, mu, sigma});
  p.seed = seed;
  return p;
}

ADMPlan ADMPlan::zero_features(const std::set<int>& features, int d) {
  ADMPlan p = all_keep(d);
  for (int j : features) {
    require(j >= 0 && j < d, "ADMPlan: feature index out of range");
    p.actions[j].kind = FeatureAction::Kind::Zero;
  }
  return p;
}

ADMPlan ADMPlan::fraction_noise(int d, double q, double mu, double sigma, std::uint64_t seed) {
  require(q >= 0.0 && q <= 1.0, "ADMPlan: fraction must lie in [0,1]");
  int count = static_cast<int>(std::lround(q * d));
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::Adm)));
  for (int i = 0; i + 1 < d; ++i) {
    int j = i + static_cast<int>(rng.below(d - i));
    std::swap(order[i], order[j]);
  }
  ADMPlan p = all_keep(d);
  p.seed = seed;
  for (int i = 0; i < count; ++i) {
    p.actions[order[i]] = FeatureAction{FeatureAction::Kind::Noise, mu, sigma};
  }
  return p;
}

Matrix apply_plan(const Matrix& features, const ADMPlan& plan) {
  require(features.cols() == plan.dim(), "apply_plan: plan length must equal feature dimension");
  Matrix out = features;
  Rng rng(mix_seed(plan.seed, static_cast<std::uint64_t>(Stream::Adm) + 1));
  for (int j = 0; j < plan.dim(); ++j) {
    const FeatureAction& a = plan.actions[j];
    switch (a.kind) {
      case FeatureAction::Kind::Keep:
        break;
      case FeatureAction::Kind::Zero:
        out.col(j).setZero();
        break;
      case FeatureAction::Kind::Noise:
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
          out(i, j) = rng.normal(a.mu, a.sigma);
        }
        break;
    }
  }
  return out;
}

SABypassPlan build_sa_bypass(int n, int d, int target, const std::set<int>& subset,
                             bool noise_on_subset, double noise_sigma, std::uint64_t seed) {
  require(n >= 1, "build_sa_bypass: need at least one user");
  require(target >= 0 && target < n, "build_sa_bypass: target out of range");
  require(!subset.empty(), "build_sa_bypass: feature subset must be non-empty");
  for (int j : subset) require(j >= 0 && j < d, "build_sa_bypass: subset index out of range");

  std::set<int> complement;
  for (int j = 0; j < d; ++j) {
    if (!subset.count(j)) complement.insert(j);
  }

  SABypassPlan plan;
  plan.target_user = target;
  plan.feature_subset = subset;
  plan.per_user.reserve(n);
  for (int u = 0; u < n; ++u) {
    if (u == target) {
      ADMPlan p = ADMPlan::zero_features(complement, d);
      if (noise_on_subset) {
        for (int j : subset) {
          p.actions[j] = FeatureAction{FeatureAction::Kind::Noise, 0.0, noise_sigma};
        }
        p.seed = mix_seed(seed, static_cast<std::uint64_t>(u));
      }
      plan.per_user.push_back(std::move(p));
    } else {
      plan.per_user.push_back(ADMPlan::zero_features(subset, d));
    }
  }
  return plan;
}

GridSearchResult grid_search_noise(const NoiseTrialFn& trial, const std::vector<double>& sigmas,
                                   int trials, std::uint64_t seed) {
  require(!sigmas.empty(), "grid_search_noise: need at least one candidate");
  require(trials >= 1, "grid_search_noise: trials must be >= 1");

  GridSearchResult result;
  result.mean_auc.reserve(sigmas.size());
  double best = -1.0;
  for (std::size_t c = 0; c < sigmas.size(); ++c) {
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      // Trial seeds are shared across candidates (coupled randomness).
      total += trial(sigmas[c], mix_seed(seed, static_cast<std::uint64_t>(t)));
    }
    double mean = total / trials;
    result.mean_auc.push_back(mean);
    bool better = mean > best;
    bool tie_smaller = mean == best && sigmas[c] < result.best_sigma;
    if (better || tie_smaller) {
      best = mean;
      result.best_sigma = sigmas[c];
    }
  }
  return result;
}

SyntheticExtractor::SyntheticExtractor(int input_dim, int hidden_dim, int feature_dim,
                                       std::uint64_t seed) {
  require(input_dim >= 1 && hidden_dim >= 1 && feature_dim >= 1,
          "SyntheticExtractor: dimensions must be >= 1");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::ModelInit)));
  auto fill = [&](Matrix& m, double bound) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
  };
  w1_ = Matrix(input_dim, hidden_dim);
  w2_ = Matrix(hidden_dim, feature_dim);
  fill(w1_, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  fill(w2_, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  b1_ = Vector::Zero(hidden_dim);
  b2_ = Vector::Zero(feature_dim);
  for (Eigen::Index i = 0; i < b1_.size(); ++i)
    b1_[i] = rng.uniform(-0.1, 0.1);
  for (Eigen::Index i = 0; i < b2_.size(); ++i)
    b2_[i] = rng.uniform(-0.1, 0.1);
}

Vector SyntheticExtractor::extract(const Vector& raw) const {
  require(raw.size() == w1_.rows(), "SyntheticExtractor: input length mismatch");
  Vector h = (w1_.transpose() * raw + b1_).cwiseMax(0.0);
  return (w2_.transpose() * h + b2_).cwiseMax(0.0);
}

Matrix SyntheticExtractor::extract_rows(const Matrix& raw_rows) const {
  Matrix out(raw_rows.rows(), feature_dim());
  for (Eigen::Index i = 0; i < raw_rows.rows(); ++i) {
    out.row(i) = extract(raw_rows.row(i).transpose()).transpose();
  }
  return out;
}

Vector indirect_manipulate(const SyntheticExtractor& extractor, const Vector& input,
                           const Vector& target, double lr, int epochs) {
  require(target.size() == extractor.feature_dim(), "indirect_manipulate: target length");
  require(target.minCoeff() >= 0.0, "indirect_manipulate: target must be non-negative");
  require(input.size() == extractor.input_dim(), "indirect_manipulate: input length");
  require(epochs >= 0 && lr > 0, "indirect_manipulate: bad optimizer settings");
  constexpr double kTolerance = 1e-12;

  auto objective = [&](const Vector& x, Vector* grad) {
    Vector pre1 = extractor.w1_.transpose() * x + extractor.b1_;
    Vector h = pre1.cwiseMax(0.0);
    Vector pre2 = extractor.w2_.transpose() * h + extractor.b2_;
    Vector f = pre2.cwiseMax(0.0);
    Vector resid = f - target;
    if (grad) {
      Vector df = 2.0 * resid.cwiseProduct((pre2.array() > 0).cast<double>().matrix());
      Vector dh = (extractor.w2_ * df).cwiseProduct((pre1.array() > 0).cast<double>().matrix());
      *grad = extractor.w1_ * dh;
    }
    return resid.squaredNorm();
  };

  double initial = objective(input, nullptr);
  if (!std::isfinite(initial)) throw NumericError("indirect_manipulate: non-finite objective");
  if (initial <= kTolerance || epochs == 0) return input;

  Vector x = input;
  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  Vector best_x = input;
  double best = initial;
  for (int t = 1; t <= epochs; ++t) {
    Vector g;
    double loss = objective(x, &g);
    if (!std::isfinite(loss) || !g.allFinite()) {
      throw NumericError("indirect_manipulate: non-finite objective");
    }
    if (loss < best) {
      best = loss;
      best_x = x;
    }
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g).eval();
    double bc1 = 1.0 - std::pow(0.9, t);
    double bc2 = 1.0 - std::pow(0.999, t);
    x -= lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + 1e-8).matrix());
  }
  double final_loss = objective(x, nullptr);
  if (std::isfinite(final_loss) && final_loss < best) {
    best = final_loss;
    best_x = x;
  }
  return best < initial ? best_x : input;
}

std::pair<Vector, Vector> partition_targets(const Vector& target) {
  Eigen::Index half = target.size() / 2;
  Vector a = target;
  Vector b = target;
  a.head(half).setZero();
  b.tail(target.size() - half).setZero();
  return {a, b};
}

}  // namespace fedrecon
