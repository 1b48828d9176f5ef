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

#include "fedrecon/models.hpp"

#include <cmath>

namespace fedrecon {

int MLPRanker::param_count() const {
  int p = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    p += static_cast<int>(weights[l].size() + biases[l].size());
  }
  return p;
}

ModelSpec ModelSpec::linear(int d, bool bias) {
  ModelSpec s;
  s.kind = Kind::Linear;
  s.input_dim = d;
  s.linear_bias = bias;
  return s;
}

ModelSpec ModelSpec::mlp(int d, std::vector<int> hidden) {
  ModelSpec s;
  s.kind = Kind::Mlp;
  s.input_dim = d;
  s.hidden = std::move(hidden);
  return s;
}

ModelSpec ModelSpec::ncf() {
  ModelSpec s;
  s.kind = Kind::Ncf;
  s.input_dim = 2 * NCFModel::kEmbeddingDim;
  s.hidden = {128, 64, 32};
  return s;
}

Vector score(const LinearRanker& model, const Matrix& features) {
  require(features.cols() == model.weights.size(), "score: feature dimension mismatch");
  Vector s = features * model.weights;
  if (model.bias) s.array() += *model.bias;
  return s;
}

Vector score(const MLPRanker& model, const Matrix& features) {
  require(features.cols() == model.input_dim(), "score: feature dimension mismatch");
  Matrix h = features;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    h = (h * model.weights[l]).rowwise() + model.biases[l].transpose();
    if (l + 1 < model.weights.size()) h = h.cwiseMax(0.0);
  }
  return h.col(0);
}

Vector score(const RankerModel& model, const Matrix& features) {
  return std::visit([&](const auto& m) { return score(m, features); }, model);
}

Vector score(const NCFModel& model, const Matrix& item_embeddings, const Vector& user_embedding) {
  require(item_embeddings.cols() == NCFModel::kEmbeddingDim, "score: item embedding width");
  require(user_embedding.size() == NCFModel::kEmbeddingDim, "score: user embedding length");
  Matrix joint(item_embeddings.rows(), 2 * NCFModel::kEmbeddingDim);
  joint << user_embedding.transpose().replicate(item_embeddings.rows(), 1), item_embeddings;
  Vector logits = score(model.mlp, joint);
  return logits.unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
}

int input_dim(const RankerModel& model) {
  return std::visit([](const auto& m) { return m.input_dim(); }, model);
}

int param_count(const RankerModel& model) {
  return std::visit([](const auto& m) { return m.param_count(); }, model);
}

Vector flatten(const LinearRanker& model) {
  Vector p(model.param_count());
  p.head(model.weights.size()) = model.weights;
  if (model.bias) p[p.size() - 1] = *model.bias;
  return p;
}

Vector flatten(const MLPRanker& model) {
  Vector p(model.param_count());
  int off = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Matrix& w = model.weights[l];
    p.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    off += static_cast<int>(w.size());
    p.segment(off, model.biases[l].size()) = model.biases[l];
    off += static_cast<int>(model.biases[l].size());
  }
  return p;
}

Vector flatten(const RankerModel& model) {
  return std::visit([](const auto& m) { return flatten(m); }, model);
}

void unflatten(LinearRanker& model, const Vector& params) {
  require(params.size() == model.param_count(), "unflatten: length mismatch");
  model.weights = params.head(model.weights.size());
  if (model.bias) model.bias = params[params.size() - 1];
}

void unflatten(MLPRanker& model, const Vector& params) {
  require(params.size() == model.param_count(), "unflatten: length mismatch");
  int off = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Matrix& w = model.weights[l];
    Eigen::Map<Vector>(w.data(), w.size()) = params.segment(off, w.size());
    off += static_cast<int>(w.size());
    model.biases[l] = params.segment(off, model.biases[l].size());
    off += static_cast<int>(model.biases[l].size());
  }
}

void unflatten(RankerModel& model, const Vector& params) {
  std::visit([&](auto& m) { unflatten(m, params); }, model);
}

std::vector<std::vector<int>> feature_parameter_indices(const LinearRanker& model) {
  std::vector<std::vector<int>> groups(model.input_dim());
  for (int j = 0; j < model.input_dim(); ++j) groups[j] = {j};
  return groups;
}

std::vector<std::vector<int>> feature_parameter_indices(const MLPRanker& model) {
  // First-layer weights are stored column-major at offset 0, so the weight
  // connecting feature j to hidden unit k sits at k * d + j.
  int d = model.input_dim();
  int h = static_cast<int>(model.weights.front().cols());
  std::vector<std::vector<int>> groups(d);
  for (int j = 0; j < d; ++j) {
    groups[j].reserve(h);
    for (int k = 0; k < h; ++k) groups[j].push_back(k * d + j);
  }
  return groups;
}

std::vector<std::vector<int>> feature_parameter_indices(const RankerModel& model) {
  return std::visit([](const auto& m) { return feature_parameter_indices(m); }, model);
}

std::vector<std::vector<int>> feature_parameter_indices(const NCFModel&) {
  throw ContractError("feature_parameter_indices: unsupported for NCF models");
}

namespace {

Matrix uniform_matrix(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  // Column-major fill matches the flattening order.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

MLPRanker init_mlp(int input, const std::vector<int>& hidden, Rng& rng) {
  MLPRanker mlp;
  std::vector<int> dims;
  dims.push_back(input);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    mlp.weights.push_back(uniform_matrix(dims[l], dims[l + 1], bound, rng));
    Vector b(dims[l + 1]);
    for (int i = 0; i < dims[l + 1]; ++i) b[i] = rng.uniform(-bound, bound);
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

}  // namespace

RankerModel init_random(const ModelSpec& spec, std::uint64_t seed) {
  require(spec.input_dim >= 1, "init_random: input_dim must be >= 1");
  Rng rng(seed);
  if (spec.kind == ModelSpec::Kind::Linear) {
    LinearRanker m;
    double bound = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
    m.weights = Vector(spec.input_dim);
    for (int i = 0; i < spec.input_dim; ++i) m.weights[i] = rng.uniform(-bound, bound);
    if (spec.linear_bias) m.bias = rng.uniform(-bound, bound);
    return m;
  }
  if (spec.kind == ModelSpec::Kind::Mlp) {
    require(!spec.hidden.empty(), "init_random: MLP needs at least one hidden layer");
    return init_mlp(spec.input_dim, spec.hidden, rng);
  }
  throw ContractError("init_random: use init_random_ncf for NCF models");
}

NCFModel init_random_ncf(std::uint64_t seed) {
  Rng rng(seed);
  NCFModel model;
  model.mlp = init_mlp(2 * NCFModel::kEmbeddingDim, {128, 64, 32}, rng);
  model.user_embedding = Vector(NCFModel::kEmbeddingDim);
  for (int i = 0; i < NCFModel::kEmbeddingDim; ++i) {
    model.user_embedding[i] = rng.uniform(-0.1, 0.1);
  }
  return model;
}

}  // namespace fedrecon
