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

#include "fedrecon/fl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedrecon/adm.hpp"
#include "fedrecon/metrics.hpp"
#include "tape_net.hpp"

namespace fedrecon {

namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void require_binary(const Vector& interactions, const char* what) {
  for (Eigen::Index i = 0; i < interactions.size(); ++i) {
    if (interactions[i] != 0.0 && interactions[i] != 1.0) {
      throw ContractError(std::string(what) + ": user-mode interactions must be 0/1");
    }
  }
}

}  // namespace

double LocalUpdate::joint_norm() const {
  double sq = params.squaredNorm();
  if (item_embedding_delta) sq += item_embedding_delta->squaredNorm();
  return std::sqrt(sq);
}

// --- pointwise ------------------------------------------------------------------

LocalUpdate local_train_pointwise(const RankerModel& model, const Matrix& features,
                                  const Vector& interactions, double lr, int epochs,
                                  InteractionMode mode) {
  require(features.rows() == interactions.size(),
          "local_train_pointwise: interactions must match feature rows");
  require(features.cols() == input_dim(model), "local_train_pointwise: feature dimension");
  require(lr > 0 && epochs >= 0, "local_train_pointwise: bad training settings");
  if (mode == InteractionMode::User) require_binary(interactions, "local_train_pointwise");

  detail::PlainNet net = detail::plain_net(model);
  Vector theta0 = detail::flatten_net(net);
  double m = static_cast<double>(features.rows());
  for (int e = 0; e < epochs; ++e) {
    detail::PlainForward fwd = detail::plain_forward(net, features);
    Matrix delta = (2.0 / m) * (fwd.scores - interactions);
    detail::PlainGrads grads = detail::plain_backward(net, fwd, delta, false);
    detail::plain_sgd_step(net, grads, lr);
  }

  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::flatten_net(net) - theta0;
  require_finite(update.params, "pointwise local update");
  return update;
}

// --- pairwise -------------------------------------------------------------------

LocalUpdate local_train_pairwise(const RankerModel& model, const std::vector<QueryBatch>& batches,
                                 double lr, InteractionMode mode) {
  require(!batches.empty(), "local_train_pairwise: batch list is empty");
  require(lr > 0, "local_train_pairwise: bad learning rate");

  detail::PlainNet net = detail::plain_net(model);
  Vector theta0 = detail::flatten_net(net);
  for (const QueryBatch& batch : batches) {
    require(batch.features.rows() == batch.interactions.size(),
            "local_train_pairwise: batch shape mismatch");
    require(batch.features.rows() <= 10, "local_train_pairwise: batches are capped at 10 items");
    require(batch.features.cols() == input_dim(model), "local_train_pairwise: feature dimension");

    detail::PlainForward fwd = detail::plain_forward(net, batch.features);
    Matrix delta;
    if (mode == InteractionMode::User) {
      require_binary(batch.interactions, "local_train_pairwise");
      // Original algorithm: sum over (clicked, unclicked) pairs.
      Eigen::Index k = batch.interactions.size();
      delta = Matrix::Zero(k, 1);
      for (Eigen::Index i = 0; i < k; ++i) {
        if (batch.interactions[i] != 1.0) continue;
        for (Eigen::Index j = 0; j < k; ++j) {
          if (batch.interactions[j] != 0.0) continue;
          double s = sigmoid(-(fwd.scores(i, 0) - fwd.scores(j, 0)));
          delta(i, 0) -= s;
          delta(j, 0) += s;
        }
      }
    } else {
      delta = detail::plain_pairwise_score_delta(fwd.scores, batch.interactions);
    }
    detail::PlainGrads grads = detail::plain_backward(net, fwd, delta, false);
    detail::plain_sgd_step(net, grads, lr);
  }

  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::flatten_net(net) - theta0;
  require_finite(update.params, "pairwise local update");
  return update;
}

// --- NCF -----------------------------------------------------------------------

namespace {

struct AdamState {
  Matrix m, v;
};

void plain_adam_step(Matrix& param, const Matrix& grad, AdamState& state, int t,
                     const NcfTrainConfig& cfg) {
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad).eval();
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  Matrix mhat = state.m * (1.0 / bc1);
  Matrix vhat = state.v * (1.0 / bc2);
  Matrix denom = ((vhat.array() + cfg.sqrt_guard).sqrt() + cfg.epsilon).matrix();
  param -= cfg.lr * mhat.cwiseQuotient(denom);
}

}  // namespace

LocalUpdate local_train_ncf(const NCFModel& model, const Matrix& sample_embeddings,
                            const Vector& labels, const NcfTrainConfig& config,
                            InteractionMode mode) {
  require(sample_embeddings.rows() > 0, "local_train_ncf: empty sample");
  require(sample_embeddings.rows() == labels.size(), "local_train_ncf: labels/sample mismatch");
  require(sample_embeddings.cols() == NCFModel::kEmbeddingDim, "local_train_ncf: embedding width");
  require(config.lr > 0 && config.epochs >= 0, "local_train_ncf: bad training settings");
  if (mode == InteractionMode::User) require_binary(labels, "local_train_ncf");

  int m = static_cast<int>(sample_embeddings.rows());
  int e_dim = NCFModel::kEmbeddingDim;
  detail::PlainNet net = detail::plain_net(RankerModel{model.mlp});
  Vector theta0 = detail::flatten_net(net);
  Matrix eu = model.user_embedding.transpose();  // 1 x 64, matching the tape layout
  Matrix items = sample_embeddings;

  int layers = net.layer_count();
  std::vector<AdamState> wstate(layers), bstate(layers);
  for (int l = 0; l < layers; ++l) {
    wstate[l] = {Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()),
                 Matrix::Zero(net.weights[l].rows(), net.weights[l].cols())};
    bstate[l] = {Matrix::Zero(1, net.biases[l].size()), Matrix::Zero(1, net.biases[l].size())};
  }
  AdamState eustate{Matrix::Zero(1, e_dim), Matrix::Zero(1, e_dim)};
  AdamState itemstate{Matrix::Zero(m, e_dim), Matrix::Zero(m, e_dim)};

  for (int t = 1; t <= config.epochs; ++t) {
    Matrix joint(m, 2 * e_dim);
    joint << eu.replicate(m, 1), items;
    detail::PlainForward fwd = detail::plain_forward(net, joint);
    Matrix delta = (fwd.scores.unaryExpr(&sigmoid) - Matrix(labels)) / static_cast<double>(m);
    detail::PlainGrads grads = detail::plain_backward(net, fwd, delta, true);
    Matrix g_eu = grads.gx.leftCols(e_dim).colwise().sum();
    Matrix g_items = grads.gx.rightCols(e_dim);
    if (config.imia_defense_weight > 0) {
      double s = config.imia_defense_weight / (static_cast<double>(m) * e_dim);
      g_items += s * (items - sample_embeddings).array().sign().matrix();
    }

    for (int l = 0; l < layers; ++l) {
      plain_adam_step(net.weights[l], grads.gw[l], wstate[l], t, config);
      Matrix brow = net.biases[l].transpose();
      plain_adam_step(brow, grads.gb[l], bstate[l], t, config);
      net.biases[l] = brow.transpose();
    }
    plain_adam_step(eu, g_eu, eustate, t, config);
    plain_adam_step(items, g_items, itemstate, t, config);
  }

  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::flatten_net(net) - theta0;
  update.item_embedding_delta = items - sample_embeddings;
  require_finite(update.params, "NCF local update");
  require_finite(*update.item_embedding_delta, "NCF embedding update");
  return update;
}

// --- tape-backed attacker simulations ----------------------------------------------

LocalUpdate simulate_pointwise_update(const RankerModel& model, const Matrix& features,
                                      const Vector& interactions, double lr, int epochs) {
  ad::Tape tape;
  ad::Var ivals = tape.input(Matrix(interactions));
  detail::PlainNet net0 = detail::plain_net(model);
  detail::TapeNet initial = detail::tape_constants(tape, net0);
  detail::TapeNet trained =
      detail::pointwise_tape_train(tape, net0, features, ivals, lr, epochs);
  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::assemble_delta(tape, detail::tape_delta_tensors(tape, trained, initial));
  return update;
}

LocalUpdate simulate_pointwise_gradient(const RankerModel& model, const Matrix& features,
                                        const Vector& interactions) {
  ad::Tape tape;
  ad::Var ivals = tape.input(Matrix(interactions));
  detail::PlainNet net0 = detail::plain_net(model);
  LocalUpdate update;
  update.kind = UpdateKind::RawGradient;
  update.params = detail::assemble_delta(
      tape, detail::pointwise_tape_gradient(tape, net0, features, ivals));
  return update;
}

LocalUpdate simulate_pairwise_update(const RankerModel& model,
                                     const std::vector<Matrix>& batch_features,
                                     const Vector& interactions_concat, double lr) {
  long total = 0;
  for (const Matrix& b : batch_features) total += b.rows();
  require(total == interactions_concat.size(),
          "simulate_pairwise_update: interaction length must match batch rows");
  ad::Tape tape;
  ad::Var ivals = tape.input(Matrix(interactions_concat));
  detail::PlainNet net0 = detail::plain_net(model);
  detail::TapeNet initial = detail::tape_constants(tape, net0);
  detail::TapeNet trained = detail::pairwise_tape_train(tape, net0, batch_features, ivals, lr);
  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::assemble_delta(tape, detail::tape_delta_tensors(tape, trained, initial));
  return update;
}

LocalUpdate simulate_ncf_update(const NCFModel& model, const Matrix& sample_embeddings,
                                const Vector& labels, const Vector& user_embedding,
                                const NcfTrainConfig& config) {
  ad::Tape tape;
  ad::Var lvals = tape.input(Matrix(labels));
  ad::Var eu = tape.input(Matrix(user_embedding.transpose()));
  detail::NcfTapeResult sim =
      detail::ncf_tape_train(tape, model, sample_embeddings, lvals, eu, config);
  LocalUpdate update;
  update.kind = UpdateKind::DeltaParams;
  update.params = detail::assemble_delta(tape, sim.delta_tensors);
  update.item_embedding_delta = tape.value(sim.embedding_delta);
  return update;
}

// --- differential privacy ---------------------------------------------------------

void DPConfig::validate() const {
  require(epsilon > 0, "DPConfig: epsilon must be positive");
  if (enabled()) {
    require(delta > 0 && delta < 1, "DPConfig: delta must lie in (0,1) for finite epsilon");
    require(sensitivity > 0, "DPConfig: sensitivity must be positive");
    if (mechanism == DpMechanism::AnalyticGaussian) {
      require(epsilon > 1, "DPConfig: the analytic mechanism is used for epsilon > 1 only");
    }
  }
}

LocalUpdate clip_update(const LocalUpdate& update, double sensitivity) {
  require(sensitivity > 0, "clip_update: sensitivity must be positive");
  double norm = update.joint_norm();
  if (norm <= sensitivity || norm == 0.0) return update;
  double factor = sensitivity / norm;
  LocalUpdate out = update;
  out.params *= factor;
  if (out.item_embedding_delta) *out.item_embedding_delta *= factor;
  return out;
}

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_std_normal_cdf(double x) {
  // erfc stays accurate until it underflows near x = -37.5; only past that
  // fall back to the asymptotic tail (needed when e^epsilon is huge).
  if (x > -37.0) return std::log(std_normal_cdf(x));
  double inv_sq = 1.0 / (x * x);
  return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI) - std::log(-x) +
         std::log1p(-inv_sq + 3.0 * inv_sq * inv_sq);
}

// Privacy curve of the Gaussian mechanism: the delta achieved by a given
// sigma. Evaluated in log space so e^epsilon cannot overflow.
double gaussian_delta(double epsilon, double sensitivity, double sigma) {
  double a = sensitivity / (2.0 * sigma);
  double b = epsilon * sigma / sensitivity;
  double first = std_normal_cdf(a - b);
  double second = std::exp(epsilon + log_std_normal_cdf(-a - b));
  return first - second;
}

}  // namespace

double calibrate_sigma(double epsilon, double delta, double sensitivity, DpMechanism mechanism) {
  require(epsilon > 0 && std::isfinite(epsilon), "calibrate_sigma: epsilon must be finite > 0");
  require(delta > 0 && delta < 1, "calibrate_sigma: delta must lie in (0,1)");
  require(sensitivity > 0, "calibrate_sigma: sensitivity must be positive");

  if (mechanism == DpMechanism::ClassicalGaussian) {
    return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
  }
  if (epsilon <= 1) {
    throw ConfigError("calibrate_sigma: analytic mechanism requires epsilon > 1");
  }

  // gaussian_delta is decreasing in sigma; bracket then bisect.
  double hi = sensitivity;
  while (gaussian_delta(epsilon, sensitivity, hi) > delta) hi *= 2.0;
  double lo = hi;
  while (gaussian_delta(epsilon, sensitivity, lo) <= delta && lo > 1e-300) lo /= 2.0;
  for (int i = 0; i < 200 && (hi - lo) > 1e-9 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    if (gaussian_delta(epsilon, sensitivity, mid) <= delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

LocalUpdate gaussian_mechanism(const LocalUpdate& update, const DPConfig& config, Rng& rng) {
  config.validate();
  if (!config.enabled()) return update;
  if (update.joint_norm() > config.sensitivity + 1e-9) {
    throw ContractError("gaussian_mechanism: update exceeds the sensitivity bound; clip first");
  }
  double sigma = calibrate_sigma(config.epsilon, config.delta, config.sensitivity,
                                 config.mechanism);
  LocalUpdate out = update;
  for (Eigen::Index i = 0; i < out.params.size(); ++i) out.params[i] += rng.normal(0, sigma);
  if (out.item_embedding_delta) {
    Matrix& e = *out.item_embedding_delta;
    for (Eigen::Index c = 0; c < e.cols(); ++c)
      for (Eigen::Index r = 0; r < e.rows(); ++r) e(r, c) += rng.normal(0, sigma);
  }
  return out;
}

LocalUpdate secure_aggregate(const std::vector<LocalUpdate>& updates) {
  require(!updates.empty(), "secure_aggregate: empty update list");
  LocalUpdate sum = updates.front();
  for (std::size_t i = 1; i < updates.size(); ++i) {
    const LocalUpdate& u = updates[i];
    require(u.kind == sum.kind, "secure_aggregate: mixed update kinds");
    require(u.params.size() == sum.params.size(), "secure_aggregate: payload length mismatch");
    require(u.item_embedding_delta.has_value() == sum.item_embedding_delta.has_value(),
            "secure_aggregate: mixed embedding presence");
    sum.params += u.params;
    if (sum.item_embedding_delta) *sum.item_embedding_delta += *u.item_embedding_delta;
  }
  return sum;
}

// --- federated training ------------------------------------------------------------

std::vector<int> softmax_sample_items(const Vector& scores, int k, Rng& rng) {
  // Gumbel top-k == sampling without replacement from softmax(scores).
  std::vector<std::pair<double, int>> keys(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    double u = rng.uniform();
    while (u <= 1e-300) u = rng.uniform();
    keys[i] = {scores[i] - std::log(-std::log(u)), static_cast<int>(i)};
  }
  int take = std::min<int>(k, static_cast<int>(scores.size()));
  std::partial_sort(keys.begin(), keys.begin() + take, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> picked(take);
  for (int i = 0; i < take; ++i) picked[i] = keys[i].second;
  return picked;
}

double mean_ndcg_at_10(const RankerModel& model, const LtrDataset& test) {
  require(test.num_queries() > 0, "mean_ndcg_at_10: empty test split");
  double total = 0;
  for (std::size_t q = 0; q < test.num_queries(); ++q) {
    Vector s = score(model, test.features[q]);
    total += ndcg_at_k(s, test.grades[q], 10);
  }
  return total / static_cast<double>(test.num_queries());
}

std::vector<Matrix> split_parameter_segments(const RankerModel& model, const Vector& flat) {
  detail::PlainNet net = detail::plain_net(model);
  require(flat.size() == net.param_count(), "split_parameter_segments: length mismatch");
  std::vector<Matrix> segments;
  int off = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    const Matrix& w = net.weights[l];
    segments.push_back(
        Eigen::Map<const Matrix>(flat.data() + off, w.rows(), w.cols()));
    off += static_cast<int>(w.size());
    if (net.has_bias[l]) {
      segments.push_back(
          Eigen::Map<const Matrix>(flat.data() + off, 1, net.biases[l].size()));
      off += static_cast<int>(net.biases[l].size());
    }
  }
  return segments;
}

FlTrainResult run_fl_training(const LtrSplit& data, const ModelSpec& spec,
                              const FlTrainConfig& config) {
  require(data.train.num_queries() > 0 && data.test.num_queries() > 0,
          "run_fl_training: need non-empty train and test splits");
  require(config.users_per_round >= 1 && config.rounds >= 0, "run_fl_training: bad schedule");
  config.dp.validate();

  RankerModel model =
      init_random(spec, substream(config.seed, 0, Stream::ModelInit));
  FlTrainResult result;
  result.ndcg_trace.push_back(mean_ndcg_at_10(model, data.test));

  int attacked_users =
      static_cast<int>(std::lround(config.attacked_fraction * config.users_per_round));
  int d = data.train.feature_dim;

  for (int round = 0; round < config.rounds; ++round) {
    Vector sum = Vector::Zero(param_count(model));
    for (int u = 0; u < config.users_per_round; ++u) {
      std::uint64_t uid = static_cast<std::uint64_t>(round) * config.users_per_round + u;
      Rng sample_rng(substream(config.seed, uid, Stream::Sampling));
      std::size_t q = sample_rng.below(data.train.num_queries());
      const Matrix& true_features = data.train.features[q];
      const std::vector<int>& grades = data.train.grades[q];

      Matrix shown = true_features;
      if (u < attacked_users) {
        shown = apply_plan(true_features,
                           ADMPlan::all_noise(d, 0.0, config.adm_noise_sigma,
                                              substream(config.seed, uid, Stream::Adm)));
      }

      // Select up to k items by softmax over the ranker's scores, display
      // them ranked, then simulate the click chain on the true grades.
      Vector scores = score(model, shown);
      std::vector<int> picked =
          softmax_sample_items(scores, config.max_items_per_query, sample_rng);
      std::sort(picked.begin(), picked.end(),
                [&](int a, int b) { return scores[a] > scores[b]; });

      QueryBatch batch;
      batch.features = Matrix(picked.size(), d);
      std::vector<int> shown_grades(picked.size());
      for (std::size_t i = 0; i < picked.size(); ++i) {
        batch.features.row(i) = shown.row(picked[i]);
        shown_grades[i] = collapse_grade(grades[picked[i]], data.train.num_grades);
      }
      batch.interactions = simulate_clicks(config.click_model, shown_grades,
                                           substream(config.seed, uid, Stream::Clicks));

      LocalUpdate update = local_train_pairwise(model, {batch}, config.lr);
      if (config.dp.enabled()) {
        update = clip_update(update, config.dp.sensitivity);
        Rng noise_rng(substream(config.seed, uid, Stream::DpNoise));
        update = gaussian_mechanism(update, config.dp, noise_rng);
      }
      sum += update.params;
    }

    Vector theta = flatten(model) + sum / static_cast<double>(config.users_per_round);
    unflatten(model, theta);
    result.ndcg_trace.push_back(mean_ndcg_at_10(model, data.test));
  }

  result.model = std::move(model);
  return result;
}

}  // namespace fedrecon
