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

#ifndef FEDRECON_METRICS_HPP
#define FEDRECON_METRICS_HPP

#include <vector>

#include "fedrecon/linalg.hpp"

namespace fedrecon {

// Probability that a uniformly random positive outscores a random negative,
// ties counted 1/2 (rank-sum form). Throws MetricError when labels are
// single-class.
double auc(const Vector& scores, const Vector& labels);

// Harmonic mean of precision and recall of (score >= threshold); 0 when there
// are no positive predictions.
double f1(const Vector& scores, const Vector& labels, double threshold = 0.5);

// NDCG@k with (2^grade - 1) gains and log2(rank+1) discounts. Returns 1 for
// lists whose ideal DCG is 0.
double ndcg_at_k(const Vector& scores, const std::vector<int>& grades, int k);

}  // namespace fedrecon

#endif  // FEDRECON_METRICS_HPP
