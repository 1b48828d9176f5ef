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

#include "fedrecon/optim.hpp"

#include <cmath>
#include <deque>

namespace fedrecon {

void OptimizerConfig::validate() const {
  require(learning_rate > 0, "optimizer: learning rate must be > 0");
  require(max_epochs >= 1, "optimizer: max_epochs must be >= 1");
  require(grad_scale_divisor > 0, "optimizer: grad_scale_divisor must be > 0");
  require(grad_tolerance >= 0 && rel_loss_tolerance >= 0, "optimizer: tolerances must be >= 0");
}

namespace {

struct Eval {
  double loss;
  Vector grad;
};

Eval checked_eval(const DifferentiableObjective& obj, const Vector& x, const Vector& last_good) {
  auto [loss, grad] = obj.value_and_grad(x);
  if (!std::isfinite(loss) || !grad.allFinite()) {
    throw NumericError("optimizer: objective became non-finite", last_good);
  }
  return {loss, std::move(grad)};
}

MinimizeResult run_adam(const DifferentiableObjective& obj, const Vector& init,
                        const OptimizerConfig& cfg) {
  Vector x = init;
  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  Eval e = checked_eval(obj, x, init);

  MinimizeResult result;
  result.point = x;
  double best = e.loss;
  result.loss_trace.push_back(e.loss);

  for (int t = 1; t <= cfg.max_epochs; ++t) {
    if (linf_norm(e.grad) <= cfg.grad_tolerance) break;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * e.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * e.grad.cwiseProduct(e.grad).eval();
    double bc1 = 1.0 - std::pow(cfg.beta1, t);
    double bc2 = 1.0 - std::pow(cfg.beta2, t);
    Vector step = (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.adam_epsilon).matrix());
    x -= cfg.learning_rate * step;
    e = checked_eval(obj, x, result.point);
    result.loss_trace.push_back(e.loss);
    result.epochs = t;
    if (e.loss < best) {
      best = e.loss;
      result.point = x;
    }
  }
  return result;
}

// L-BFGS with a strong Wolfe line search (bracket + bisection zoom),
// following Nocedal & Wright Alg. 3.5/3.6.
class LbfgsSolver {
 public:
  LbfgsSolver(const DifferentiableObjective& obj, const OptimizerConfig& cfg)
      : obj_(obj), cfg_(cfg) {}

  MinimizeResult solve(const Vector& init) {
    Vector x = init;
    Eval e = checked_eval(obj_, x, init);
    MinimizeResult result;
    result.point = x;
    double best = e.loss;
    result.loss_trace.push_back(e.loss);

    std::deque<Vector> s_hist, y_hist;

    for (int iter = 1; iter <= cfg_.max_epochs; ++iter) {
      if (linf_norm(e.grad) <= cfg_.grad_tolerance) break;

      Vector d = direction(e.grad, s_hist, y_hist);
      double dg = d.dot(e.grad);
      if (dg >= 0) {
        // Curvature information went stale; restart from steepest descent.
        s_hist.clear();
        y_hist.clear();
        d = -e.grad;
        dg = d.dot(e.grad);
      }

      double prev_loss = e.loss;
      Vector prev_grad = e.grad;
      Vector x0 = x;
      double alpha = line_search(x0, d, prev_loss, dg, e, result.point);
      if (alpha <= 0) break;  // no acceptable step

      x = x0 + alpha * d;
      result.loss_trace.push_back(e.loss);
      result.epochs = iter;
      if (e.loss < best) {
        best = e.loss;
        result.point = x;
      }

      Vector s = alpha * d;
      Vector y = e.grad - prev_grad;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        if (static_cast<int>(s_hist.size()) > cfg_.lbfgs_history) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }

      double denom = std::max(1.0, std::abs(prev_loss));
      if (std::abs(prev_loss - e.loss) <= cfg_.rel_loss_tolerance * denom) break;
    }
    return result;
  }

 private:
  Vector direction(const Vector& grad, const std::deque<Vector>& s_hist,
                   const std::deque<Vector>& y_hist) const {
    Vector q = -grad;
    if (s_hist.empty()) return q;
    int k = static_cast<int>(s_hist.size());
    std::vector<double> alpha(k), rho(k);
    for (int i = k - 1; i >= 0; --i) {
      rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
      alpha[i] = rho[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    q *= gamma;
    for (int i = 0; i < k; ++i) {
      double beta = rho[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    return q;
  }

  // Returns the accepted step and leaves the evaluation at x0 + alpha*d in
  // `e`. Returns 0 when no Wolfe point is found.
  double line_search(const Vector& x0, const Vector& d, double f0, double df0, Eval& e,
                     const Vector& last_good) {
    constexpr double kC1 = 1e-4;
    constexpr double kC2 = 0.9;
    constexpr int kMaxBracket = 25;
    constexpr int kMaxZoom = 40;

    auto eval_at = [&](double a) -> Eval {
      return checked_eval(obj_, Vector(x0 + a * d), last_good);
    };

    double a_prev = 0.0, f_prev = f0;
    double a = 1.0;
    double a_lo = 0, a_hi = 0, f_lo = 0;
    Eval e_lo;
    bool bracketed = false;

    for (int i = 1; i <= kMaxBracket; ++i) {
      Eval ei = eval_at(a);
      if (ei.loss > f0 + kC1 * a * df0 || (i > 1 && ei.loss >= f_prev)) {
        a_lo = a_prev;
        f_lo = f_prev;
        a_hi = a;
        bracketed = true;
        break;
      }
      double di = ei.grad.dot(d);
      if (std::abs(di) <= -kC2 * df0) {
        e = std::move(ei);
        return a;
      }
      if (di >= 0) {
        a_lo = a;
        f_lo = ei.loss;
        a_hi = a_prev;
        e_lo = std::move(ei);
        bracketed = true;
        break;
      }
      a_prev = a;
      f_prev = ei.loss;
      a *= 2.0;
      if (a > 1e6) break;
    }
    if (!bracketed) return 0.0;

    for (int j = 0; j < kMaxZoom; ++j) {
      double aj = 0.5 * (a_lo + a_hi);
      Eval ej = eval_at(aj);
      if (ej.loss > f0 + kC1 * aj * df0 || ej.loss >= f_lo) {
        a_hi = aj;
      } else {
        double dj = ej.grad.dot(d);
        if (std::abs(dj) <= -kC2 * df0) {
          e = std::move(ej);
          return aj;
        }
        if (dj * (a_hi - a_lo) >= 0) a_hi = a_lo;
        a_lo = aj;
        f_lo = ej.loss;
        e_lo = std::move(ej);
      }
      if (std::abs(a_hi - a_lo) < 1e-14 * std::max(1.0, std::abs(a_lo))) break;
    }
    // Fall back to the best sufficient-decrease point found, if any.
    if (a_lo > 0 && f_lo < f0 && e_lo.grad.size() > 0) {
      e = std::move(e_lo);
      return a_lo;
    }
    return 0.0;
  }

  const DifferentiableObjective& obj_;
  const OptimizerConfig& cfg_;
};

}  // namespace

MinimizeResult minimize(const DifferentiableObjective& objective, const Vector& init,
                        const OptimizerConfig& config) {
  config.validate();
  require(init.size() == objective.dim(), "minimize: init dimension mismatch");
  require(init.allFinite(), "minimize: init must be finite");
  if (config.algorithm == OptAlgorithm::Adam) {
    return run_adam(objective, init, config);
  }
  return LbfgsSolver(objective, config).solve(init);
}

}  // namespace fedrecon
