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

#ifndef FEDRECON_ADM_HPP
#define FEDRECON_ADM_HPP

#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "fedrecon/linalg.hpp"
#include "fedrecon/models.hpp"

namespace fedrecon {

// --- feature manipulation plans -----------------------------------------------

// Per-feature action applied to the training features served to one user.
struct FeatureAction {
  enum class Kind { Keep, Zero, Noise };
  Kind kind = Kind::Keep;
  double mu = 0.0;
  double sigma = 0.0;
};

struct ADMPlan {
  std::vector<FeatureAction> actions;  // length d
  std::uint64_t seed = 0;              // noise expansion seed

  int dim() const { return static_cast<int>(actions.size()); }
  double manipulated_fraction() const;

  static ADMPlan all_keep(int d);
  static ADMPlan all_noise(int d, double mu, double sigma, std::uint64_t seed);
  // Zeroes exactly the listed features, keeps the rest.
  static ADMPlan zero_features(const std::set<int>& features, int d);
  // Replaces round(q*d) uniformly chosen columns with noise.
  static ADMPlan fraction_noise(int d, double q, double mu, double sigma, std::uint64_t seed);
};

// Applies a plan column-wise: keep copies, zero blanks, noise redraws the
// column iid N(mu, sigma^2). Deterministic in (plan, matrix shape).
Matrix apply_plan(const Matrix& features, const ADMPlan& plan);

// --- secure-aggregation bypass --------------------------------------------------

// Feature assignment that isolates one user's update inside a summed
// aggregate: the target keeps (optionally noise-injects) the subset D and has
// everything else zeroed; every other user has exactly D zeroed.
struct SABypassPlan {
  int target_user = 0;
  std::set<int> feature_subset;    // D
  std::vector<ADMPlan> per_user;   // n entries

  const ADMPlan& plan_for(int user) const { return per_user.at(user); }
};

SABypassPlan build_sa_bypass(int n, int d, int target, const std::set<int>& subset,
                             bool noise_on_subset = false, double noise_sigma = 0.1,
                             std::uint64_t seed = 0);

// --- noise parameter search -------------------------------------------------------

// Callback runs one simulate-attack-score cycle on server-generated fake
// interactions and reports the reconstruction AUC.
using NoiseTrialFn = std::function<double(double sigma, std::uint64_t trial_seed)>;

struct GridSearchResult {
  double best_sigma = 0.0;
  std::vector<double> mean_auc;  // parallel to the candidate list
};

// Mean AUC per candidate over `trials`; best = argmax, ties toward smaller
// sigma.
GridSearchResult grid_search_noise(const NoiseTrialFn& trial, const std::vector<double>& sigmas,
                                   int trials, std::uint64_t seed);

// --- indirect manipulation ----------------------------------------------------------

// Frozen random two-layer MLP standing in for a pretrained feature
// extractor; the final rectifier keeps outputs non-negative.
class SyntheticExtractor {
 public:
  SyntheticExtractor(int input_dim, int hidden_dim, int feature_dim, std::uint64_t seed);

  Vector extract(const Vector& raw) const;
  Matrix extract_rows(const Matrix& raw_rows) const;

  int input_dim() const { return static_cast<int>(w1_.rows()); }
  int feature_dim() const { return static_cast<int>(w2_.cols()); }

 private:
  friend Vector indirect_manipulate(const SyntheticExtractor&, const Vector&, const Vector&,
                                    double, int);
  Matrix w1_, w2_;
  Vector b1_, b2_;
};

// Gradient-descent (Adam) on || extract(x) - target ||^2 starting from
// `input`. Target entries must be non-negative (the extractor cannot reach
// below zero). Returns the input unchanged when the objective is already at
// tolerance or no strict improvement was found.
Vector indirect_manipulate(const SyntheticExtractor& extractor, const Vector& input,
                           const Vector& target, double lr = 0.01, int epochs = 500);

// Splits a target into two complementary vectors: A has the first half
// zeroed, B the second half (first half = floor(d/2) entries). A + B = target.
std::pair<Vector, Vector> partition_targets(const Vector& target);

}  // namespace fedrecon

#endif  // FEDRECON_ADM_HPP
