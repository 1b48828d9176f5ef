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

#include "fedrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedrecon {

double auc(const Vector& scores, const Vector& labels) {
  require(scores.size() == labels.size(), "auc: scores/labels length mismatch");
  long positives = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0.0 || labels[i] == 1.0, "auc: labels must be binary");
    positives += labels[i] == 1.0;
  }
  long negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("auc: undefined for single-class labels");
  }

  // Rank-sum with midranks for ties.
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1.0) positive_rank_sum += midrank;
    }
    i = j + 1;
  }
  double u = positive_rank_sum - 0.5 * static_cast<double>(positives) * (positives + 1);
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double f1(const Vector& scores, const Vector& labels, double threshold) {
  require(scores.size() == labels.size(), "f1: scores/labels length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= threshold;
    bool actual = labels[i] == 1.0;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  if (tp == 0) return 0.0;
  double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

double dcg_at_k(const std::vector<int>& ordered_grades, int k) {
  double dcg = 0;
  int n = std::min<int>(k, static_cast<int>(ordered_grades.size()));
  for (int i = 0; i < n; ++i) {
    dcg += (std::pow(2.0, ordered_grades[i]) - 1.0) / std::log2(i + 2.0);
  }
  return dcg;
}

}  // namespace

double ndcg_at_k(const Vector& scores, const std::vector<int>& grades, int k) {
  require(scores.size() == static_cast<Eigen::Index>(grades.size()),
          "ndcg: scores/grades length mismatch");
  require(k >= 1, "ndcg: k must be >= 1");

  std::vector<int> order(grades.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> ranked(grades.size());
  for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = grades[order[i]];

  std::vector<int> ideal = grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());

  double idcg = dcg_at_k(ideal, k);
  if (idcg == 0) return 1.0;
  return dcg_at_k(ranked, k) / idcg;
}

}  // namespace fedrecon
