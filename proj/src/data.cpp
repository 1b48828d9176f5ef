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

#include "fedrecon/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fedrecon/rng.hpp"

namespace fedrecon {

long LtrDataset::total_items() const {
  long n = 0;
  for (const auto& f : features) n += f.rows();
  return n;
}

namespace {

// Raw parsed rows per query, densified once the global dimension is known.
struct SparseRow {
  int grade = 0;
  std::vector<std::pair<int, double>> values;  // 1-based feature index
};

bool parse_long(std::string_view s, long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(std::string(s), &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

LtrDataset parse_letor(std::istream& in, int expected_dim) {
  std::vector<long> qid_order;
  std::map<long, std::vector<SparseRow>> rows;
  int max_feature = expected_dim;
  int max_grade = 0;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    std::istringstream tokens{std::string(sv)};
    std::string tok;
    if (!(tokens >> tok)) continue;  // blank or comment-only line

    SparseRow row;
    long grade;
    if (!parse_long(tok, grade) || grade < 0) {
      throw ParseError("expected a non-negative integer relevance grade, got '" + tok + "'",
                       line_no);
    }
    row.grade = static_cast<int>(grade);

    if (!(tokens >> tok) || tok.rfind("qid:", 0) != 0) {
      throw ParseError("expected 'qid:<id>' after the grade", line_no);
    }
    long qid;
    if (!parse_long(std::string_view(tok).substr(4), qid)) {
      throw ParseError("malformed query id '" + tok + "'", line_no);
    }

    while (tokens >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) {
        throw ParseError("malformed feature token '" + tok + "'", line_no);
      }
      long idx;
      double val;
      if (!parse_long(std::string_view(tok).substr(0, colon), idx) || idx < 1) {
        throw ParseError("feature indices are 1-based integers, got '" + tok + "'", line_no);
      }
      if (!parse_double(std::string_view(tok).substr(colon + 1), val)) {
        throw ParseError("malformed feature value in '" + tok + "'", line_no);
      }
      if (expected_dim > 0 && idx > expected_dim) {
        throw ParseError("feature index " + std::to_string(idx) +
                             " exceeds the declared dimension " + std::to_string(expected_dim),
                         line_no);
      }
      row.values.emplace_back(static_cast<int>(idx), val);
      max_feature = std::max(max_feature, static_cast<int>(idx));
    }

    max_grade = std::max(max_grade, row.grade);
    if (rows.find(qid) == rows.end()) qid_order.push_back(qid);
    rows[qid].push_back(std::move(row));
  }

  LtrDataset ds;
  ds.feature_dim = max_feature;
  ds.num_grades = qid_order.empty() ? 0 : max_grade + 1;
  for (long qid : qid_order) {
    const auto& qrows = rows[qid];
    Matrix f = Matrix::Zero(qrows.size(), max_feature);
    std::vector<int> g(qrows.size());
    for (std::size_t i = 0; i < qrows.size(); ++i) {
      g[i] = qrows[i].grade;
      for (auto [idx, val] : qrows[i].values) f(i, idx - 1) = val;
    }
    ds.query_ids.push_back(qid);
    ds.features.push_back(std::move(f));
    ds.grades.push_back(std::move(g));
  }
  return ds;
}

LtrDataset parse_letor_file(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_letor(in, expected_dim);
}

void serialize_letor(const LtrDataset& dataset, std::ostream& out) {
  char buf[64];
  for (std::size_t q = 0; q < dataset.num_queries(); ++q) {
    const Matrix& f = dataset.features[q];
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      out << dataset.grades[q][i] << " qid:" << dataset.query_ids[q];
      for (Eigen::Index j = 0; j < f.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", f(i, j));
        out << ' ' << (j + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

LtrDataset normalize_features(const LtrDataset& dataset) {
  require(dataset.total_items() >= 2, "normalize_features: need at least 2 items");
  int d = dataset.feature_dim;
  Vector mean = Vector::Zero(d);
  Vector sq = Vector::Zero(d);
  double n = 0;
  for (const Matrix& f : dataset.features) {
    mean += f.colwise().sum().transpose();
    sq += f.array().square().colwise().sum().matrix().transpose();
    n += static_cast<double>(f.rows());
  }
  mean /= n;
  Vector var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
  Vector stddev = var.cwiseSqrt();

  LtrDataset out = dataset;
  for (Matrix& f : out.features) {
    for (int j = 0; j < d; ++j) {
      if (stddev[j] > 0) {
        f.col(j) = (f.col(j).array() - mean[j]) / stddev[j];
      } else {
        f.col(j).setZero();
      }
    }
  }
  return out;
}

int collapse_grade(int grade, int num_grades) {
  if (num_grades <= 3) return grade;
  if (grade <= 1) return 0;
  if (grade <= 3) return 1;
  return 2;
}

namespace {

RecDataset finalize_rec(int max_user, int max_item, std::vector<std::set<int>>& per_user) {
  RecDataset ds;
  ds.num_users = max_user + 1;
  ds.num_items = max_item + 1;
  ds.interactions.resize(ds.num_users);
  for (int u = 0; u <= max_user; ++u) {
    ds.interactions[u].assign(per_user[u].begin(), per_user[u].end());
  }
  return ds;
}

}  // namespace

RecDataset load_movielens(std::istream& in) {
  std::vector<std::set<int>> per_user;
  int max_user = -1, max_item = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    std::istringstream tokens{std::string(sv)};
    std::string user_s, item_s;
    if (!(tokens >> user_s >> item_s)) {
      throw ParseError("expected at least user and item columns", line_no);
    }
    long user, item;
    if (!parse_long(user_s, user) || !parse_long(item_s, item) || user < 0 || item < 0) {
      throw ParseError("user and item ids must be non-negative integers", line_no);
    }
    if (user >= static_cast<long>(per_user.size())) per_user.resize(user + 1);
    per_user[user].insert(static_cast<int>(item));
    max_user = std::max(max_user, static_cast<int>(user));
    max_item = std::max(max_item, static_cast<int>(item));
  }
  if (max_user < 0) return RecDataset{};
  return finalize_rec(max_user, max_item, per_user);
}

RecDataset load_movielens_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return load_movielens(in);
}

RecDataset load_steam_csv(std::istream& in) {
  std::vector<std::set<int>> per_user;
  std::unordered_map<std::string, int> item_ids;
  int max_user = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;

    // Fields: user, item name (possibly quoted), behavior, value[, ...].
    std::size_t c1 = sv.find(',');
    if (c1 == std::string_view::npos) throw ParseError("expected comma-separated fields", line_no);
    long user;
    if (!parse_long(sv.substr(0, c1), user) || user < 0) {
      throw ParseError("user id must be a non-negative integer", line_no);
    }
    std::string_view rest = sv.substr(c1 + 1);
    std::string name;
    if (!rest.empty() && rest.front() == '"') {
      auto close = rest.find('"', 1);
      if (close == std::string_view::npos) throw ParseError("unterminated quote", line_no);
      name = std::string(rest.substr(1, close - 1));
    } else {
      name = std::string(rest.substr(0, rest.find(',')));
    }
    if (name.empty()) throw ParseError("empty item name", line_no);

    auto [it, inserted] = item_ids.emplace(name, static_cast<int>(item_ids.size()));
    (void)inserted;
    if (user >= static_cast<long>(per_user.size())) per_user.resize(user + 1);
    per_user[user].insert(it->second);
    max_user = std::max(max_user, static_cast<int>(user));
  }
  if (max_user < 0) return RecDataset{};
  return finalize_rec(max_user, static_cast<int>(item_ids.size()) - 1, per_user);
}

TrainingSample build_training_sample(const RecDataset& dataset, int user, std::uint64_t seed) {
  require(user >= 0 && user < dataset.num_users, "build_training_sample: unknown user");
  const std::vector<int>& positives = dataset.interactions[user];
  if (positives.empty()) {
    throw ContractError("build_training_sample: user " + std::to_string(user) +
                        " has no interactions");
  }

  std::vector<int> pool;
  pool.reserve(dataset.num_items - positives.size());
  std::set<int> positive_set(positives.begin(), positives.end());
  for (int i = 0; i < dataset.num_items; ++i) {
    if (!positive_set.count(i)) pool.push_back(i);
  }

  std::size_t want = std::min(pool.size(), 4 * positives.size());
  Rng rng(seed);
  // Partial Fisher-Yates over the negative pool.
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }

  TrainingSample sample;
  sample.item_ids = positives;
  sample.item_ids.insert(sample.item_ids.end(), pool.begin(), pool.begin() + want);
  sample.labels = Vector::Zero(sample.item_ids.size());
  sample.labels.head(positives.size()).setOnes();
  return sample;
}

namespace {

// Grade = global quantile bucket of a relevance score, so grades correlate
// with the features that produced the score.
void assign_quantile_grades(LtrDataset& ds, const std::vector<double>& scores, int grades) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  auto bucket = [&](double v) {
    std::size_t rank = std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
    int b = static_cast<int>(rank * grades / sorted.size());
    return std::min(b, grades - 1);
  };
  std::size_t k = 0;
  for (auto& qg : ds.grades) {
    for (int& g : qg) g = bucket(scores[k++]);
  }
}

}  // namespace

LtrDataset synthetic_ltr(std::uint64_t seed, int queries, int items_per_query, int d,
                         int grades) {
  require(queries >= 1 && items_per_query >= 1 && d >= 1 && grades >= 1,
          "synthetic_ltr: all counts must be >= 1");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::Data)));
  Vector w(d);
  for (int j = 0; j < d; ++j) w[j] = rng.normal();
  w /= std::sqrt(static_cast<double>(d));

  LtrDataset ds;
  ds.feature_dim = d;
  ds.num_grades = grades;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(queries) * items_per_query);
  for (int q = 0; q < queries; ++q) {
    Matrix f(items_per_query, d);
    for (int i = 0; i < items_per_query; ++i)
      for (int j = 0; j < d; ++j) f(i, j) = rng.normal();
    Vector s = f * w;
    for (int i = 0; i < items_per_query; ++i) scores.push_back(s[i] + 0.5 * rng.normal());
    ds.query_ids.push_back(q + 1);
    ds.features.push_back(std::move(f));
    ds.grades.emplace_back(items_per_query, 0);
  }
  assign_quantile_grades(ds, scores, grades);
  return ds;
}

LtrDataset synthetic_ltr_collinear(std::uint64_t seed, int queries, int items_per_query, int d,
                                   int grades, int latent_rank, double item_scale) {
  require(queries >= 1 && items_per_query >= 1 && d >= 1 && grades >= 1 && latent_rank >= 1,
          "synthetic_ltr_collinear: all counts must be >= 1");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::Data)));

  // Shared mixing matrix lifting low-dimensional item latents to d features;
  // identical across queries, like engineered LTR feature sets. The low rank
  // is what keeps unmanipulated gradient matching from separating items.
  Matrix mix(latent_rank, d);
  for (int r = 0; r < latent_rank; ++r)
    for (int j = 0; j < d; ++j) mix(r, j) = rng.normal();
  mix /= std::sqrt(static_cast<double>(latent_rank));
  Vector w(latent_rank);
  for (int r = 0; r < latent_rank; ++r) w[r] = rng.normal();

  LtrDataset ds;
  ds.feature_dim = d;
  ds.num_grades = grades;
  std::vector<double> scores;
  for (int q = 0; q < queries; ++q) {
    Vector query_latent(latent_rank);
    for (int r = 0; r < latent_rank; ++r) query_latent[r] = rng.normal();
    Matrix f(items_per_query, d);
    for (int i = 0; i < items_per_query; ++i) {
      Vector latent(latent_rank);
      for (int r = 0; r < latent_rank; ++r) {
        latent[r] = query_latent[r] + item_scale * rng.normal();
      }
      f.row(i) = latent.transpose() * mix;
      scores.push_back(latent.dot(w) + 0.3 * rng.normal());
    }
    ds.query_ids.push_back(q + 1);
    ds.features.push_back(std::move(f));
    ds.grades.emplace_back(items_per_query, 0);
  }
  assign_quantile_grades(ds, scores, grades);
  return ds;
}

RecDataset synthetic_movielens(std::uint64_t seed, int users, int items,
                               double avg_interactions) {
  require(users >= 1 && items >= 1 && avg_interactions >= 1, "synthetic_movielens: bad geometry");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::Data)));

  // Zipf-ish item popularity.
  std::vector<double> weight(items);
  for (int i = 0; i < items; ++i) weight[i] = 1.0 / std::pow(i + 1.0, 0.8);
  std::discrete_distribution<int> popular(weight.begin(), weight.end());

  // Per-user counts spread lognormally around the requested average, floored
  // at 20 like the benchmark this stands in for.
  double mu = std::log(avg_interactions) - 0.32;
  RecDataset ds;
  ds.num_users = users;
  ds.num_items = items;
  ds.interactions.resize(users);
  for (int u = 0; u < users; ++u) {
    int count = static_cast<int>(std::lround(std::exp(rng.normal(mu, 0.8))));
    count = std::clamp(count, 20, std::max(20, items * 2 / 5));
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < count) {
      chosen.insert(popular(rng.engine()));
    }
    ds.interactions[u].assign(chosen.begin(), chosen.end());
  }
  return ds;
}

LtrSplit split_queries(const LtrDataset& dataset, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0 && train_fraction < 1, "split_queries: fraction must be in (0,1)");
  require(dataset.num_queries() >= 2, "split_queries: need at least 2 queries");
  std::size_t n = dataset.num_queries();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::Data) + 1));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  std::size_t cut = std::max<std::size_t>(1, static_cast<std::size_t>(n * train_fraction));
  cut = std::min(cut, n - 1);

  LtrSplit split;
  for (LtrDataset* part : {&split.train, &split.test}) {
    part->feature_dim = dataset.feature_dim;
    part->num_grades = dataset.num_grades;
  }
  for (std::size_t i = 0; i < n; ++i) {
    LtrDataset& part = i < cut ? split.train : split.test;
    std::size_t q = order[i];
    part.query_ids.push_back(dataset.query_ids[q]);
    part.features.push_back(dataset.features[q]);
    part.grades.push_back(dataset.grades[q]);
  }
  return split;
}

}  // namespace fedrecon
