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
//
// Internal helpers: a layer-net view of the rankers, its plain (Eigen) and
// tape-recorded training passes. Shared by the protocol simulations and the
// reconstruction objectives; not installed.

#ifndef FEDRECON_SRC_TAPE_NET_HPP
#define FEDRECON_SRC_TAPE_NET_HPP

#include <optional>
#include <vector>

#include "fedrecon/fl.hpp"
#include "fedrecon/models.hpp"
#include "fedrecon/tape.hpp"

namespace fedrecon::detail {

// Uniform layer view: weights[l] is (in x out); a layer may lack a bias
// (linear ranker without one). Hidden activations are ReLU, output identity.
struct PlainNet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;  // zero-length when absent
  std::vector<bool> has_bias;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int param_count() const;
};

PlainNet plain_net(const RankerModel& model);
// Flat vector in the models::flatten order (per layer: weights column-major,
// then bias when present).
Vector flatten_net(const PlainNet& net);

struct PlainForward {
  Matrix scores;               // (m x 1)
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // hidden pre-activations
};
PlainForward plain_forward(const PlainNet& net, const Matrix& x);

struct PlainGrads {
  std::vector<Matrix> gw;
  std::vector<Matrix> gb;  // (1 x out) rows; empty when no bias
  Matrix gx;
};
PlainGrads plain_backward(const PlainNet& net, const PlainForward& fwd, const Matrix& delta,
                          bool need_gx);

void plain_sgd_step(PlainNet& net, const PlainGrads& grads, double lr);

// dL/ds of the weighted pairwise loss sum_ij W_ij softplus(-(s_i - s_j)) with
// W = I (1 - I)^T, zero diagonal.
Matrix plain_pairwise_score_delta(const Matrix& scores, const Vector& interactions);

// --- tape mirror ------------------------------------------------------------------

struct TapeNet {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;  // invalid Var when absent
  std::vector<bool> has_bias;
};

TapeNet tape_constants(ad::Tape& tape, const PlainNet& net);

struct TapeForward {
  ad::Var scores;
  std::vector<ad::Var> inputs;
  std::vector<ad::Var> pre;
};
TapeForward tape_forward(ad::Tape& tape, const TapeNet& net, ad::Var x);

struct TapeGrads {
  std::vector<ad::Var> gw;
  std::vector<ad::Var> gb;
  ad::Var gx;
};
TapeGrads tape_backward(ad::Tape& tape, const TapeNet& net, const TapeForward& fwd, ad::Var delta,
                        bool need_gx);

TapeNet tape_sgd_step(ad::Tape& tape, const TapeNet& net, const TapeGrads& grads, double lr);

ad::Var tape_pairwise_score_delta(ad::Tape& tape, ad::Var scores, ad::Var interactions);

// Recorded local-training programs. All return the trained net (or tensors);
// deltas against the initial constants are the simulated updates.
TapeNet pointwise_tape_train(ad::Tape& tape, const PlainNet& net0, const Matrix& features,
                             ad::Var interactions, double lr, int epochs);
// Per-tensor raw gradient of the unnormalized pointwise loss (single-gradient
// form), in flatten order.
std::vector<ad::Var> pointwise_tape_gradient(ad::Tape& tape, const PlainNet& net0,
                                             const Matrix& features, ad::Var interactions);
TapeNet pairwise_tape_train(ad::Tape& tape, const PlainNet& net0,
                            const std::vector<Matrix>& batch_features, ad::Var interactions,
                            double lr);

struct NcfTapeResult {
  std::vector<ad::Var> delta_tensors;  // MLP tensor deltas in flatten order
  ad::Var embedding_delta;             // (m x 64)
};
// user_embedding is a (1 x 64) tape var so the joint RS attack can
// differentiate with respect to it.
NcfTapeResult ncf_tape_train(ad::Tape& tape, const NCFModel& model, const Matrix& sample_embeddings,
                             ad::Var labels, ad::Var user_embedding, const NcfTrainConfig& config);

// Per-tensor deltas (trained minus initial) in flatten order.
std::vector<ad::Var> tape_delta_tensors(ad::Tape& tape, const TapeNet& trained,
                                        const TapeNet& initial);
// Values of the deltas, flattened.
Vector assemble_delta(const ad::Tape& tape, const std::vector<ad::Var>& delta_tensors);

}  // namespace fedrecon::detail

#endif  // FEDRECON_SRC_TAPE_NET_HPP
