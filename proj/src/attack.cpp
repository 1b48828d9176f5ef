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

#include <chrono>
#include <cmath>

#include <Eigen/Dense>

#include "fedrecon/rng.hpp"
#include "fedrecon/tape.hpp"
#include "tape_net.hpp"

namespace fedrecon {

void AttackConfig::validate() const {
  optimizer.validate();
  require(rounding_threshold > 0 && rounding_threshold < 1,
          "AttackConfig: rounding threshold must lie in (0,1)");
  require(restarts >= 1, "AttackConfig: restarts must be >= 1");
  require(prior_weight >= 0, "AttackConfig: prior weight must be >= 0");
}

namespace {

// L2 matching of per-tensor simulated deltas against the received segments,
// with optional protocol clipping of the simulated update and per-tensor
// weights (1 for parameters, 1/m for the RS embedding block).
ad::Var matching_loss(ad::Tape& tape, std::vector<ad::Var> sim,
                      const std::vector<Matrix>& received, double divisor,
                      std::optional<double> clip_norm, const std::vector<double>& weights) {
  if (clip_norm) {
    ad::Var norm_sq;
    for (std::size_t t = 0; t < sim.size(); ++t) {
      ad::Var ss = tape.sum_squares(sim[t]);
      norm_sq = t == 0 ? ss : tape.add(norm_sq, ss);
    }
    ad::Var norm = tape.sqrt(tape.add_scalar(norm_sq, 1e-300));
    ad::Var factor =
        tape.cdiv(tape.constant_scalar(*clip_norm), tape.cmax_scalar(norm, *clip_norm));
    for (ad::Var& s : sim) s = tape.scale_by(s, factor);
  }

  ad::Var loss;
  for (std::size_t t = 0; t < sim.size(); ++t) {
    ad::Var diff = tape.sub(tape.constant(received[t]), sim[t]);
    ad::Var term = tape.scale(tape.sum_squares(diff), weights[t] / (divisor * divisor));
    loss = t == 0 ? term : tape.add(loss, term);
  }
  return loss;
}

ad::Var add_prior(ad::Tape& tape, ad::Var loss, ad::Var interactions, double prior_weight) {
  if (prior_weight <= 0) return loss;
  return tape.add(loss,
                  tape.scale(tape.sum_squares(tape.add_scalar(interactions, -0.5)), prior_weight));
}

class PointwiseObjective : public DifferentiableObjective {
 public:
  PointwiseObjective(RankerModel model, Matrix features, const LocalUpdate& received, double lr,
                     int epochs, double divisor, std::optional<double> clip, double prior)
      : model_(std::move(model)),
        features_(std::move(features)),
        received_(split_parameter_segments(model_, received.params)),
        lr_(lr),
        epochs_(epochs),
        divisor_(divisor),
        clip_(clip),
        prior_(prior) {}

  int dim() const override { return static_cast<int>(features_.rows()); }

  double value(const Vector& point) const override { return build(point, nullptr); }

  std::pair<double, Vector> value_and_grad(const Vector& point) const override {
    Vector grad;
    double loss = build(point, &grad);
    return {loss, std::move(grad)};
  }

 private:
  double build(const Vector& point, Vector* grad) const {
    require(point.size() == dim(), "pointwise objective: candidate dimension");
    ad::Tape tape;
    ad::Var candidates = tape.input(Matrix(point));
    detail::PlainNet net0 = detail::plain_net(model_);
    detail::TapeNet initial = detail::tape_constants(tape, net0);
    detail::TapeNet trained =
        detail::pointwise_tape_train(tape, net0, features_, candidates, lr_, epochs_);
    std::vector<ad::Var> sim = detail::tape_delta_tensors(tape, trained, initial);
    ad::Var loss = matching_loss(tape, std::move(sim), received_, divisor_, clip_,
                                 std::vector<double>(received_.size(), 1.0));
    loss = add_prior(tape, loss, candidates, prior_);
    double value = tape.scalar(loss);
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(candidates).col(0);
    }
    return value;
  }

  RankerModel model_;
  Matrix features_;
  std::vector<Matrix> received_;
  double lr_;
  int epochs_;
  double divisor_;
  std::optional<double> clip_;
  double prior_;
};

class PointwiseGradientObjective : public DifferentiableObjective {
 public:
  PointwiseGradientObjective(RankerModel model, Matrix features, const LocalUpdate& received)
      : model_(std::move(model)),
        features_(std::move(features)),
        received_(split_parameter_segments(model_, received.params)) {}

  int dim() const override { return static_cast<int>(features_.rows()); }

  double value(const Vector& point) const override { return build(point, nullptr); }
  std::pair<double, Vector> value_and_grad(const Vector& point) const override {
    Vector grad;
    double loss = build(point, &grad);
    return {loss, std::move(grad)};
  }

 private:
  double build(const Vector& point, Vector* grad) const {
    require(point.size() == dim(), "pointwise gradient objective: candidate dimension");
    ad::Tape tape;
    ad::Var candidates = tape.input(Matrix(point));
    detail::PlainNet net0 = detail::plain_net(model_);
    std::vector<ad::Var> sim =
        detail::pointwise_tape_gradient(tape, net0, features_, candidates);
    ad::Var loss = matching_loss(tape, std::move(sim), received_, 1.0, std::nullopt,
                                 std::vector<double>(received_.size(), 1.0));
    double value = tape.scalar(loss);
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(candidates).col(0);
    }
    return value;
  }

  RankerModel model_;
  Matrix features_;
  std::vector<Matrix> received_;
};

class PairwiseObjective : public DifferentiableObjective {
 public:
  PairwiseObjective(RankerModel model, std::vector<Matrix> batches, const LocalUpdate& received,
                    double lr, double divisor, std::optional<double> clip, double prior)
      : model_(std::move(model)),
        batches_(std::move(batches)),
        received_(split_parameter_segments(model_, received.params)),
        lr_(lr),
        divisor_(divisor),
        clip_(clip),
        prior_(prior) {
    for (const Matrix& b : batches_) total_items_ += static_cast<int>(b.rows());
  }

  int dim() const override { return total_items_; }

  double value(const Vector& point) const override { return build(point, nullptr); }
  std::pair<double, Vector> value_and_grad(const Vector& point) const override {
    Vector grad;
    double loss = build(point, &grad);
    return {loss, std::move(grad)};
  }

 private:
  double build(const Vector& point, Vector* grad) const {
    require(point.size() == dim(), "pairwise objective: candidate dimension");
    ad::Tape tape;
    ad::Var candidates = tape.input(Matrix(point));
    detail::PlainNet net0 = detail::plain_net(model_);
    detail::TapeNet initial = detail::tape_constants(tape, net0);
    detail::TapeNet trained =
        detail::pairwise_tape_train(tape, net0, batches_, candidates, lr_);
    std::vector<ad::Var> sim = detail::tape_delta_tensors(tape, trained, initial);
    ad::Var loss = matching_loss(tape, std::move(sim), received_, divisor_, clip_,
                                 std::vector<double>(received_.size(), 1.0));
    loss = add_prior(tape, loss, candidates, prior_);
    double value = tape.scalar(loss);
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(candidates).col(0);
    }
    return value;
  }

  RankerModel model_;
  std::vector<Matrix> batches_;
  std::vector<Matrix> received_;
  double lr_;
  double divisor_;
  std::optional<double> clip_;
  double prior_;
  int total_items_ = 0;
};

class NcfObjective : public DifferentiableObjective {
 public:
  NcfObjective(NCFModel model, Matrix sample_embeddings, const LocalUpdate& received,
               NcfTrainConfig train_config, double divisor, std::optional<double> clip,
               double prior)
      : model_(std::move(model)),
        sample_embeddings_(std::move(sample_embeddings)),
        received_theta_(
            split_parameter_segments(RankerModel{model_.mlp}, received.params)),
        train_config_(train_config),
        divisor_(divisor),
        clip_(clip),
        prior_(prior) {
    require(received.item_embedding_delta.has_value(),
            "ncf objective: received update lacks item embeddings");
    received_embedding_ = *received.item_embedding_delta;
    require(received_embedding_.rows() == sample_embeddings_.rows(),
            "ncf objective: embedding update must cover the sample");
  }

  int dim() const override {
    return static_cast<int>(sample_embeddings_.rows()) + NCFModel::kEmbeddingDim;
  }

  double value(const Vector& point) const override { return build(point, nullptr); }
  std::pair<double, Vector> value_and_grad(const Vector& point) const override {
    Vector grad;
    double loss = build(point, &grad);
    return {loss, std::move(grad)};
  }

 private:
  double build(const Vector& point, Vector* grad) const {
    require(point.size() == dim(), "ncf objective: candidate dimension");
    int m = static_cast<int>(sample_embeddings_.rows());
    int e_dim = NCFModel::kEmbeddingDim;

    ad::Tape tape;
    ad::Var labels = tape.input(Matrix(point.head(m)));
    ad::Var embedding = tape.input(Matrix(point.tail(e_dim).transpose()));
    detail::NcfTapeResult sim = detail::ncf_tape_train(tape, model_, sample_embeddings_, labels,
                                                       embedding, train_config_);

    std::vector<ad::Var> tensors = std::move(sim.delta_tensors);
    std::vector<Matrix> received = received_theta_;
    std::vector<double> weights(tensors.size(), 1.0);
    tensors.push_back(sim.embedding_delta);
    received.push_back(received_embedding_);
    weights.push_back(1.0 / static_cast<double>(m));  // mean item-embedding distance

    ad::Var loss = matching_loss(tape, std::move(tensors), received, divisor_, clip_, weights);
    loss = add_prior(tape, loss, labels, prior_);
    double value = tape.scalar(loss);
    if (grad) {
      tape.backward(loss);
      grad->resize(dim());
      grad->head(m) = tape.grad(labels).col(0);
      grad->tail(e_dim) = tape.grad(embedding).row(0);
    }
    return value;
  }

  NCFModel model_;
  Matrix sample_embeddings_;
  std::vector<Matrix> received_theta_;
  Matrix received_embedding_;
  NcfTrainConfig train_config_;
  double divisor_;
  std::optional<double> clip_;
  double prior_;
};

}  // namespace

std::unique_ptr<DifferentiableObjective> make_pointwise_objective(
    const RankerModel& model, const Matrix& features, const LocalUpdate& received, double lr,
    int epochs, double divisor, std::optional<double> clip_norm, double prior_weight) {
  require(received.kind == UpdateKind::DeltaParams, "pointwise objective: expects delta updates");
  return std::make_unique<PointwiseObjective>(model, features, received, lr, epochs, divisor,
                                              clip_norm, prior_weight);
}

std::unique_ptr<DifferentiableObjective> make_pointwise_gradient_objective(
    const RankerModel& model, const Matrix& features, const LocalUpdate& received) {
  require(received.kind == UpdateKind::RawGradient,
          "pointwise gradient objective: expects raw-gradient updates");
  return std::make_unique<PointwiseGradientObjective>(model, features, received);
}

std::unique_ptr<DifferentiableObjective> make_pairwise_objective(
    const RankerModel& model, const std::vector<Matrix>& batch_features,
    const LocalUpdate& received, double lr, double divisor, std::optional<double> clip_norm,
    double prior_weight) {
  require(received.kind == UpdateKind::DeltaParams, "pairwise objective: expects delta updates");
  require(!batch_features.empty(), "pairwise objective: need at least one batch");
  return std::make_unique<PairwiseObjective>(model, batch_features, received, lr, divisor,
                                             clip_norm, prior_weight);
}

std::unique_ptr<DifferentiableObjective> make_ncf_objective(
    const NCFModel& model, const Matrix& sample_embeddings, const LocalUpdate& received,
    const NcfTrainConfig& train_config, double divisor, std::optional<double> clip_norm,
    double prior_weight) {
  require(received.kind == UpdateKind::DeltaParams, "ncf objective: expects delta updates");
  return std::make_unique<NcfObjective>(model, sample_embeddings, received, train_config, divisor,
                                        clip_norm, prior_weight);
}

namespace {

ReconstructionResult run_reconstruction(const DifferentiableObjective& objective,
                                        const AttackConfig& config, std::uint64_t seed,
                                        int num_items, int embedding_dim) {
  config.validate();
  require(num_items >= 1, "reconstruct: need at least one item");
  require(objective.dim() == num_items + embedding_dim, "reconstruct: dimension mismatch");

  auto start = std::chrono::steady_clock::now();
  ReconstructionResult best;
  bool have_best = false;

  for (int r = 0; r < config.restarts; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(Stream::AttackInit) + r));
    Vector init(objective.dim());
    for (int i = 0; i < num_items; ++i) init[i] = rng.uniform();
    for (int i = 0; i < embedding_dim; ++i) init[num_items + i] = rng.uniform(-0.1, 0.1);

    ReconstructionResult result;
    double init_loss = objective.value(init);
    if (init_loss <= 1e-15) {
      // No signal to match (zero update / zero features): unidentifiable.
      result.interactions = init.head(num_items);
      if (embedding_dim > 0) result.user_embedding = init.tail(embedding_dim);
      result.final_loss = init_loss;
      result.loss_trace = {init_loss};
      result.degenerate_at_init = true;
    } else {
      MinimizeResult min;
      try {
        min = minimize(objective, init, config.optimizer);
      } catch (const NumericError& err) {
        if (err.last_good_iterate.size() != objective.dim()) throw;
        NumericError carried("reconstruct: " + std::string(err.what()));
        carried.last_good_iterate = err.last_good_iterate;
        throw carried;
      }
      result.interactions = min.point.head(num_items);
      if (embedding_dim > 0) result.user_embedding = min.point.tail(embedding_dim);
      result.final_loss = min.loss_trace.empty() ? init_loss : *std::min_element(
                              min.loss_trace.begin(), min.loss_trace.end());
      result.loss_trace = std::move(min.loss_trace);
    }

    if (!have_best || result.final_loss < best.final_loss) {
      best = std::move(result);
      have_best = true;
    }
  }

  best.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return best;
}

}  // namespace

ReconstructionResult reconstruct(const DifferentiableObjective& objective, int num_items,
                                 const AttackConfig& config, std::uint64_t seed) {
  return run_reconstruction(objective, config, seed, num_items, 0);
}

ReconstructionResult reconstruct_rs(const DifferentiableObjective& objective, int num_items,
                                    int embedding_dim, const AttackConfig& config,
                                    std::uint64_t seed) {
  require(embedding_dim >= 1, "reconstruct_rs: embedding dimension must be >= 1");
  return run_reconstruction(objective, config, seed, num_items, embedding_dim);
}

Vector closed_form_pointwise(const RankerModel& model, const Matrix& features,
                             const Vector& received_gradient) {
  require(features.cols() == input_dim(model), "closed_form_pointwise: feature dimension");
  require(received_gradient.size() == param_count(model),
          "closed_form_pointwise: gradient length");
  int m = static_cast<int>(features.rows());
  int p = param_count(model);

  detail::PlainNet net = detail::plain_net(model);
  detail::PlainForward fwd = detail::plain_forward(net, features);

  // J(i, :) = d f_i / d theta, assembled by one backward pass per item.
  Matrix jac(m, p);
  for (int i = 0; i < m; ++i) {
    Matrix unit = Matrix::Zero(m, 1);
    unit(i, 0) = 1.0;
    detail::PlainGrads grads = detail::plain_backward(net, fwd, unit, false);
    int off = 0;
    for (int l = 0; l < net.layer_count(); ++l) {
      const Matrix& gw = grads.gw[l];
      jac.row(i).segment(off, gw.size()) =
          Eigen::Map<const Vector>(gw.data(), gw.size()).transpose();
      off += static_cast<int>(gw.size());
      if (net.has_bias[l]) {
        jac.row(i).segment(off, grads.gb[l].size()) = grads.gb[l].row(0);
        off += static_cast<int>(grads.gb[l].size());
      }
    }
  }

  Matrix gram = jac * jac.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  double max_eig = eig.eigenvalues().maxCoeff();
  double min_eig = eig.eigenvalues().minCoeff();
  if (m > p || min_eig <= 0 || max_eig / min_eig > 1e12) {
    throw RankConditionError(
        "closed_form_pointwise: rank(df/dtheta) < m (Gram condition " +
        std::to_string(min_eig > 0 ? max_eig / min_eig : std::numeric_limits<double>::infinity()) +
        ", items " + std::to_string(m) + ", parameters " + std::to_string(p) + ")");
  }

  Vector rhs = jac * received_gradient;
  return fwd.scores.col(0) - 0.5 * gram.ldlt().solve(rhs);
}

Vector brute_force(const DifferentiableObjective& objective, int num_items) {
  require(num_items >= 1, "brute_force: need at least one item");
  if (num_items > 20) {
    throw ContractError("brute_force: refusing m > 20 (2^m candidates)");
  }
  require(objective.dim() == num_items, "brute_force: dimension mismatch");

  Vector best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::uint64_t combos = 1ULL << num_items;
  Vector candidate(num_items);
  for (std::uint64_t c = 0; c < combos; ++c) {
    // Counter MSB = first item, so ascending c enumerates lexicographic
    // order and keeping strict improvements breaks ties toward the smaller
    // vector.
    for (int j = 0; j < num_items; ++j) {
      candidate[j] = static_cast<double>((c >> (num_items - 1 - j)) & 1ULL);
    }
    double loss = objective.value(candidate);
    if (loss < best_loss) {
      best_loss = loss;
      best = candidate;
    }
  }
  return best;
}

ConvexityReport convexity_diagnostics(const UpdateSimulator& simulator, const Vector& point,
                                      double probe_tolerance) {
  require(point.size() >= 1, "convexity_diagnostics: empty point");
  int m = static_cast<int>(point.size());
  Vector g0 = simulator(point);
  require_finite(g0, "convexity diagnostics base update");
  double scale = std::max(1.0, linf_norm(g0));

  ConvexityReport report;

  // Affinity probe: g affine in I means second differences vanish along any
  // direction. Three collinear points per direction.
  Rng rng(20260501);
  double residual = 0.0;
  for (int probe = 0; probe < 3; ++probe) {
    Vector dir(m);
    for (int i = 0; i < m; ++i) dir[i] = rng.normal();
    dir /= dir.norm();
    double t = 0.5;
    Vector g1 = simulator(point + t * dir);
    Vector g2 = simulator(point + 2.0 * t * dir);
    residual = std::max(residual, linf_norm(g2 - 2.0 * g1 + g0) / scale);
  }
  report.affinity_residual = residual;
  if (residual > probe_tolerance) {
    report.applicable = false;  // Hessian form 2 J J^T inapplicable
    return report;
  }
  report.applicable = true;

  // For affine g the rows of J are exact forward differences.
  Matrix jac(m, g0.size());
  for (int i = 0; i < m; ++i) {
    Vector shifted = point;
    shifted[i] += 1.0;
    jac.row(i) = (simulator(shifted) - g0).transpose();
  }

  Matrix hessian = 2.0 * jac * jac.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian);
  report.min_eigenvalue = eig.eigenvalues().minCoeff();

  Eigen::JacobiSVD<Matrix> svd(jac);
  double tol = 1e-10 * std::max(1.0, svd.singularValues().maxCoeff());
  report.gradient_rank =
      static_cast<int>((svd.singularValues().array() > tol).count());
  report.strictly_convex = report.gradient_rank == m;
  return report;
}

}  // namespace fedrecon
