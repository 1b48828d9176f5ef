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

#ifndef FEDRECON_MODELS_HPP
#define FEDRECON_MODELS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedrecon/linalg.hpp"
#include "fedrecon/rng.hpp"

namespace fedrecon {

// Linear scoring model. The federated parameter vector is `weights`
// followed by `bias` when present.
struct LinearRanker {
  Vector weights;
  std::optional<double> bias;

  int input_dim() const { return static_cast<int>(weights.size()); }
  int param_count() const { return input_dim() + (bias ? 1 : 0); }
};

// Fully connected ranker: input -> hidden layers (ReLU) -> 1 (identity).
// weights[l] is (in x out); flattening is column-major per layer, weights
// then bias, layers in order.
struct MLPRanker {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int input_dim() const { return static_cast<int>(weights.front().rows()); }
  int param_count() const;
};

// Neural collaborative filtering scorer. The MLP consumes the concatenation
// of the user embedding and an item embedding (2 * kEmbeddingDim inputs),
// passes through ReLU hidden layers and a sigmoid output. The user embedding
// is private and never part of a shared update.
struct NCFModel {
  static constexpr int kEmbeddingDim = 64;

  MLPRanker mlp;         // 128 -> 128 -> 64 -> 32 -> 1 by default
  Vector user_embedding; // length kEmbeddingDim
};

using RankerModel = std::variant<LinearRanker, MLPRanker>;

struct ModelSpec {
  enum class Kind { Linear, Mlp, Ncf };
  Kind kind = Kind::Linear;
  int input_dim = 0;             // feature dimension (ignored for NCF)
  std::vector<int> hidden;       // hidden layer widths for Mlp
  bool linear_bias = false;

  static ModelSpec linear(int d, bool bias = false);
  static ModelSpec mlp(int d, std::vector<int> hidden);
  static ModelSpec ncf();
};

// --- scoring ---------------------------------------------------------------

Vector score(const LinearRanker& model, const Matrix& features);
Vector score(const MLPRanker& model, const Matrix& features);
Vector score(const RankerModel& model, const Matrix& features);
// NCF: item_embeddings is (m x 64); output is sigmoid-activated, in (0, 1).
Vector score(const NCFModel& model, const Matrix& item_embeddings, const Vector& user_embedding);

int input_dim(const RankerModel& model);
int param_count(const RankerModel& model);

// --- flat parameter vector --------------------------------------------------

Vector flatten(const LinearRanker& model);
Vector flatten(const MLPRanker& model);
Vector flatten(const RankerModel& model);
void unflatten(LinearRanker& model, const Vector& params);
void unflatten(MLPRanker& model, const Vector& params);
void unflatten(RankerModel& model, const Vector& params);

// --- fingerprinting support --------------------------------------------------

// Flat-parameter indices in direct contact with each input feature: the
// feature weight for a linear model, the first-layer row for an MLP. Bias
// indices are excluded (a bias touches every item). NCF is rejected.
std::vector<std::vector<int>> feature_parameter_indices(const LinearRanker& model);
std::vector<std::vector<int>> feature_parameter_indices(const MLPRanker& model);
std::vector<std::vector<int>> feature_parameter_indices(const RankerModel& model);
// Fingerprinting operates on embeddings in the RS scenario; always throws.
std::vector<std::vector<int>> feature_parameter_indices(const NCFModel& model);

// --- initialization ----------------------------------------------------------

// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included;
// embeddings ~ U[-0.1, 0.1]. Reproducible from the seed.
RankerModel init_random(const ModelSpec& spec, std::uint64_t seed);
NCFModel init_random_ncf(std::uint64_t seed);

}  // namespace fedrecon

#endif  // FEDRECON_MODELS_HPP
