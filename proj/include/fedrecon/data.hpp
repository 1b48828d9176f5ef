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

#ifndef FEDRECON_DATA_HPP
#define FEDRECON_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedrecon/linalg.hpp"

namespace fedrecon {

// Learning-to-rank dataset: per-query feature matrix plus integer relevance
// grades. Query order is first appearance in the source.
struct LtrDataset {
  std::vector<long> query_ids;
  std::vector<Matrix> features;            // per query: (items x d)
  std::vector<std::vector<int>> grades;    // per query, parallel to rows
  int feature_dim = 0;
  int num_grades = 0;                      // grades take values 0 .. num_grades-1

  std::size_t num_queries() const { return query_ids.size(); }
  long total_items() const;
};

// Implicit-feedback recommendation dataset.
struct RecDataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::vector<int>> interactions;  // per user, sorted unique item ids
};

struct TrainingSample {
  std::vector<int> item_ids;
  Vector labels;  // 1 = interacted, 0 = sampled negative
};

// --- LETOR / SVMlight ranking format ----------------------------------------
//
// Lines look like `2 qid:7 1:0.5 2:-1.0 # comment`; feature indices are
// 1-based and sparse (missing -> 0). expected_dim > 0 pins the feature
// dimension and rejects lines exceeding it.
LtrDataset parse_letor(std::istream& in, int expected_dim = 0);
LtrDataset parse_letor_file(const std::string& path, int expected_dim = 0);
void serialize_letor(const LtrDataset& dataset, std::ostream& out);

// Standardizes every feature column to global mean 0 / population stddev 1.
// Zero-variance columns become all zeros.
LtrDataset normalize_features(const LtrDataset& dataset);

// Collapses a 5-grade scale to the 3-grade one the click models use
// (0,1 -> 0; 2,3 -> 1; 4 -> 2). No-op for <= 3 grades.
int collapse_grade(int grade, int num_grades);

// --- interaction logs ---------------------------------------------------------
//
// Tab-separated `user item rating timestamp` rows; every row counts as an
// interaction regardless of rating. Duplicates collapse.
RecDataset load_movielens(std::istream& in);
RecDataset load_movielens_file(const std::string& path);

// CSV adapter `user,game,behavior,value[,junk]` where the item column is a
// name; any row (play or purchase) counts as an interaction.
RecDataset load_steam_csv(std::istream& in);

// All interacted items labeled 1 plus up to 4x uniformly sampled
// non-interacted negatives labeled 0 (without replacement, truncated when the
// pool runs dry).
TrainingSample build_training_sample(const RecDataset& dataset, int user, std::uint64_t seed);

// --- synthetic generators -----------------------------------------------------

// i.i.d. standard-normal features; grades are quantile buckets of a fixed
// random linear score plus noise, so they correlate with the features.
LtrDataset synthetic_ltr(std::uint64_t seed, int queries, int items_per_query, int d, int grades);

// Stand-in with the conditioning of the public 46-feature benchmarks: item
// features share a low-rank query component, which is what keeps plain
// gradient matching (no manipulation) from identifying every item.
LtrDataset synthetic_ltr_collinear(std::uint64_t seed, int queries, int items_per_query, int d,
                                   int grades, int latent_rank = 6,
                                   double item_scale = 0.25);

// Interaction log with MovieLens-100K-like geometry (power-law item
// popularity, per-user counts spread around `avg_interactions`).
RecDataset synthetic_movielens(std::uint64_t seed, int users, int items, double avg_interactions);

// Deterministic train/test query split (head/tail after seeded shuffle).
struct LtrSplit {
  LtrDataset train;
  LtrDataset test;
};
LtrSplit split_queries(const LtrDataset& dataset, double train_fraction, std::uint64_t seed);

}  // namespace fedrecon

#endif  // FEDRECON_DATA_HPP
