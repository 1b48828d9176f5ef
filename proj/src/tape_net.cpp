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

#include "tape_net.hpp"

#include <cmath>

namespace fedrecon::detail {

int PlainNet::param_count() const {
  int p = 0;
  for (int l = 0; l < layer_count(); ++l) {
    p += static_cast<int>(weights[l].size() + biases[l].size());
  }
  return p;
}

PlainNet plain_net(const RankerModel& model) {
  PlainNet net;
  if (const auto* lin = std::get_if<LinearRanker>(&model)) {
    net.weights.push_back(lin->weights);
    if (lin->bias) {
      Vector b(1);
      b[0] = *lin->bias;
      net.biases.push_back(std::move(b));
      net.has_bias.push_back(true);
    } else {
      net.biases.emplace_back(0);
      net.has_bias.push_back(false);
    }
  } else {
    const auto& mlp = std::get<MLPRanker>(model);
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
      net.weights.push_back(mlp.weights[l]);
      net.biases.push_back(mlp.biases[l]);
      net.has_bias.push_back(true);
    }
  }
  return net;
}

Vector flatten_net(const PlainNet& net) {
  Vector flat(net.param_count());
  int off = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    const Matrix& w = net.weights[l];
    flat.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    off += static_cast<int>(w.size());
    if (net.has_bias[l]) {
      flat.segment(off, net.biases[l].size()) = net.biases[l];
      off += static_cast<int>(net.biases[l].size());
    }
  }
  return flat;
}

PlainForward plain_forward(const PlainNet& net, const Matrix& x) {
  PlainForward fwd;
  Matrix h = x;
  for (int l = 0; l < net.layer_count(); ++l) {
    fwd.inputs.push_back(h);
    Matrix z = h * net.weights[l];
    if (net.has_bias[l]) z.rowwise() += net.biases[l].transpose();
    if (l + 1 < net.layer_count()) {
      fwd.pre.push_back(z);
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  fwd.scores = std::move(h);
  return fwd;
}

PlainGrads plain_backward(const PlainNet& net, const PlainForward& fwd, const Matrix& delta,
                          bool need_gx) {
  int layers = net.layer_count();
  PlainGrads grads;
  grads.gw.resize(layers);
  grads.gb.resize(layers);
  Matrix d = delta;
  for (int l = layers - 1; l >= 0; --l) {
    grads.gw[l] = fwd.inputs[l].transpose() * d;
    if (net.has_bias[l]) grads.gb[l] = d.colwise().sum();
    if (l > 0) {
      d = (d * net.weights[l].transpose())
              .cwiseProduct((fwd.pre[l - 1].array() > 0.0).cast<double>().matrix());
    } else if (need_gx) {
      grads.gx = d * net.weights[0].transpose();
    }
  }
  return grads;
}

void plain_sgd_step(PlainNet& net, const PlainGrads& grads, double lr) {
  for (int l = 0; l < net.layer_count(); ++l) {
    net.weights[l] -= lr * grads.gw[l];
    if (net.has_bias[l]) net.biases[l] -= lr * grads.gb[l].transpose();
  }
}

Matrix plain_pairwise_score_delta(const Matrix& scores, const Vector& interactions) {
  Eigen::Index m = scores.rows();
  Matrix w = interactions * (Vector::Ones(m) - interactions).transpose();
  w.diagonal().setZero();
  Matrix diff = scores.replicate(1, m) - scores.transpose().replicate(m, 1);
  Matrix p = -w.cwiseProduct(diff.unaryExpr([](double v) {
    // sigmoid(-v)
    return v >= 0 ? std::exp(-v) / (1.0 + std::exp(-v)) : 1.0 / (1.0 + std::exp(v));
  }));
  return p.rowwise().sum() - p.colwise().sum().transpose();
}

TapeNet tape_constants(ad::Tape& tape, const PlainNet& net) {
  TapeNet tn;
  tn.has_bias = net.has_bias;
  for (int l = 0; l < net.layer_count(); ++l) {
    tn.weights.push_back(tape.constant(net.weights[l]));
    tn.biases.push_back(net.has_bias[l] ? tape.constant(net.biases[l].transpose())
                                        : ad::Var{});
  }
  return tn;
}

TapeForward tape_forward(ad::Tape& tape, const TapeNet& net, ad::Var x) {
  TapeForward fwd;
  ad::Var h = x;
  int layers = static_cast<int>(net.weights.size());
  for (int l = 0; l < layers; ++l) {
    fwd.inputs.push_back(h);
    ad::Var z = tape.matmul(h, net.weights[l]);
    if (net.has_bias[l]) {
      z = tape.add(z, tape.replicate_rows(net.biases[l],
                                          static_cast<int>(tape.value(z).rows())));
    }
    if (l + 1 < layers) {
      fwd.pre.push_back(z);
      h = tape.relu(z);
    } else {
      h = z;
    }
  }
  fwd.scores = h;
  return fwd;
}

TapeGrads tape_backward(ad::Tape& tape, const TapeNet& net, const TapeForward& fwd, ad::Var delta,
                        bool need_gx) {
  int layers = static_cast<int>(net.weights.size());
  TapeGrads grads;
  grads.gw.resize(layers);
  grads.gb.resize(layers);
  ad::Var d = delta;
  for (int l = layers - 1; l >= 0; --l) {
    grads.gw[l] = tape.matmul(tape.transpose(fwd.inputs[l]), d);
    if (net.has_bias[l]) grads.gb[l] = tape.col_sums(d);
    if (l > 0) {
      d = tape.cmul(tape.matmul(d, tape.transpose(net.weights[l])),
                    tape.step_mask(fwd.pre[l - 1]));
    } else if (need_gx) {
      grads.gx = tape.matmul(d, tape.transpose(net.weights[0]));
    }
  }
  return grads;
}

TapeNet tape_sgd_step(ad::Tape& tape, const TapeNet& net, const TapeGrads& grads, double lr) {
  TapeNet out;
  out.has_bias = net.has_bias;
  int layers = static_cast<int>(net.weights.size());
  for (int l = 0; l < layers; ++l) {
    out.weights.push_back(tape.sub(net.weights[l], tape.scale(grads.gw[l], lr)));
    out.biases.push_back(net.has_bias[l]
                             ? tape.sub(net.biases[l], tape.scale(grads.gb[l], lr))
                             : ad::Var{});
  }
  return out;
}

ad::Var tape_pairwise_score_delta(ad::Tape& tape, ad::Var scores, ad::Var interactions) {
  int m = static_cast<int>(tape.value(scores).rows());
  ad::Var ones = tape.constant(Matrix::Ones(m, 1));
  ad::Var w = tape.zero_diag(
      tape.matmul(interactions, tape.transpose(tape.sub(ones, interactions))));
  ad::Var diff = tape.pairwise_diff(scores);
  ad::Var p = tape.neg(tape.cmul(w, tape.sigmoid(tape.neg(diff))));
  return tape.sub(tape.row_sums(p), tape.transpose(tape.col_sums(p)));
}

TapeNet pointwise_tape_train(ad::Tape& tape, const PlainNet& net0, const Matrix& features,
                             ad::Var interactions, double lr, int epochs) {
  TapeNet net = tape_constants(tape, net0);
  ad::Var x = tape.constant(features);
  double m = static_cast<double>(features.rows());
  for (int e = 0; e < epochs; ++e) {
    TapeForward fwd = tape_forward(tape, net, x);
    ad::Var delta = tape.scale(tape.sub(fwd.scores, interactions), 2.0 / m);
    TapeGrads grads = tape_backward(tape, net, fwd, delta, false);
    net = tape_sgd_step(tape, net, grads, lr);
  }
  return net;
}

std::vector<ad::Var> pointwise_tape_gradient(ad::Tape& tape, const PlainNet& net0,
                                             const Matrix& features, ad::Var interactions) {
  TapeNet net = tape_constants(tape, net0);
  ad::Var x = tape.constant(features);
  TapeForward fwd = tape_forward(tape, net, x);
  ad::Var delta = tape.scale(tape.sub(fwd.scores, interactions), 2.0);
  TapeGrads grads = tape_backward(tape, net, fwd, delta, false);
  std::vector<ad::Var> tensors;
  for (int l = 0; l < static_cast<int>(net.weights.size()); ++l) {
    tensors.push_back(grads.gw[l]);
    if (net.has_bias[l]) tensors.push_back(grads.gb[l]);
  }
  return tensors;
}

TapeNet pairwise_tape_train(ad::Tape& tape, const PlainNet& net0,
                            const std::vector<Matrix>& batch_features, ad::Var interactions,
                            double lr) {
  TapeNet net = tape_constants(tape, net0);
  int offset = 0;
  for (const Matrix& bx : batch_features) {
    int k = static_cast<int>(bx.rows());
    ad::Var x = tape.constant(bx);
    ad::Var bi = tape.block(interactions, offset, 0, k, 1);
    TapeForward fwd = tape_forward(tape, net, x);
    ad::Var delta = tape_pairwise_score_delta(tape, fwd.scores, bi);
    TapeGrads grads = tape_backward(tape, net, fwd, delta, false);
    net = tape_sgd_step(tape, net, grads, lr);
    offset += k;
  }
  return net;
}

namespace {

struct AdamChain {
  ad::Var m, v;
};

ad::Var tape_adam_step(ad::Tape& tape, ad::Var param, ad::Var grad, AdamChain& chain, int t,
                       const NcfTrainConfig& cfg) {
  chain.m = tape.add(tape.scale(chain.m, cfg.beta1), tape.scale(grad, 1.0 - cfg.beta1));
  chain.v = tape.add(tape.scale(chain.v, cfg.beta2), tape.scale(tape.square(grad), 1.0 - cfg.beta2));
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  ad::Var mhat = tape.scale(chain.m, 1.0 / bc1);
  ad::Var vhat = tape.scale(chain.v, 1.0 / bc2);
  // sqrt_guard keeps the adjoint of sqrt finite at v = 0.
  ad::Var denom = tape.add_scalar(tape.sqrt(tape.add_scalar(vhat, cfg.sqrt_guard)), cfg.epsilon);
  return tape.sub(param, tape.scale(tape.cdiv(mhat, denom), cfg.lr));
}

}  // namespace

NcfTapeResult ncf_tape_train(ad::Tape& tape, const NCFModel& model, const Matrix& sample_embeddings,
                             ad::Var labels, ad::Var user_embedding,
                             const NcfTrainConfig& config) {
  int m = static_cast<int>(sample_embeddings.rows());
  int e_dim = NCFModel::kEmbeddingDim;
  PlainNet net0 = plain_net(RankerModel{model.mlp});
  TapeNet net = tape_constants(tape, net0);
  TapeNet initial = net;
  ad::Var items0 = tape.constant(sample_embeddings);
  ad::Var items = items0;
  ad::Var eu = user_embedding;

  int tensor_count = static_cast<int>(net.weights.size()) * 2;
  std::vector<AdamChain> chains(tensor_count + 2);  // per layer W,b then eu, items
  auto zero_like = [&](ad::Var v) {
    return tape.constant(Matrix::Zero(tape.value(v).rows(), tape.value(v).cols()));
  };
  for (int l = 0; l < static_cast<int>(net.weights.size()); ++l) {
    chains[2 * l] = {zero_like(net.weights[l]), zero_like(net.weights[l])};
    chains[2 * l + 1] = {zero_like(net.biases[l]), zero_like(net.biases[l])};
  }
  chains[tensor_count] = {zero_like(eu), zero_like(eu)};
  chains[tensor_count + 1] = {zero_like(items), zero_like(items)};

  for (int t = 1; t <= config.epochs; ++t) {
    ad::Var joint = tape.hcat(tape.replicate_rows(eu, m), items);
    TapeForward fwd = tape_forward(tape, net, joint);
    // d/dz of mean(softplus(z) - y z) is (sigmoid(z) - y)/m.
    ad::Var delta = tape.scale(tape.sub(tape.sigmoid(fwd.scores), labels), 1.0 / m);
    TapeGrads grads = tape_backward(tape, net, fwd, delta, true);
    ad::Var g_eu = tape.col_sums(tape.block(grads.gx, 0, 0, m, e_dim));
    ad::Var g_items = tape.block(grads.gx, 0, e_dim, m, e_dim);
    if (config.imia_defense_weight > 0) {
      // d/dX of w * mean|X - X0|.
      double s = config.imia_defense_weight / (static_cast<double>(m) * e_dim);
      g_items = tape.add(g_items, tape.scale(tape.sign(tape.sub(items, items0)), s));
    }

    TapeNet next;
    next.has_bias = net.has_bias;
    for (int l = 0; l < static_cast<int>(net.weights.size()); ++l) {
      next.weights.push_back(tape_adam_step(tape, net.weights[l], grads.gw[l], chains[2 * l], t,
                                            config));
      next.biases.push_back(tape_adam_step(tape, net.biases[l], grads.gb[l], chains[2 * l + 1], t,
                                           config));
    }
    eu = tape_adam_step(tape, eu, g_eu, chains[tensor_count], t, config);
    items = tape_adam_step(tape, items, g_items, chains[tensor_count + 1], t, config);
    net = std::move(next);
  }

  NcfTapeResult result;
  result.delta_tensors = tape_delta_tensors(tape, net, initial);
  result.embedding_delta = tape.sub(items, items0);
  return result;
}

std::vector<ad::Var> tape_delta_tensors(ad::Tape& tape, const TapeNet& trained,
                                        const TapeNet& initial) {
  std::vector<ad::Var> tensors;
  for (int l = 0; l < static_cast<int>(trained.weights.size()); ++l) {
    tensors.push_back(tape.sub(trained.weights[l], initial.weights[l]));
    if (trained.has_bias[l]) {
      tensors.push_back(tape.sub(trained.biases[l], initial.biases[l]));
    }
  }
  return tensors;
}

Vector assemble_delta(const ad::Tape& tape, const std::vector<ad::Var>& delta_tensors) {
  int total = 0;
  for (ad::Var v : delta_tensors) total += static_cast<int>(tape.value(v).size());
  Vector flat(total);
  int off = 0;
  for (ad::Var v : delta_tensors) {
    const Matrix& m = tape.value(v);
    flat.segment(off, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    off += static_cast<int>(m.size());
  }
  return flat;
}

}  // namespace fedrecon::detail
