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

#ifndef FEDRECON_CLICKS_HPP
#define FEDRECON_CLICKS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedrecon/linalg.hpp"

namespace fedrecon {

// Click-chain browsing model: the user scans a ranked list top-down, clicks
// an item with p_click[grade] and, after a click, abandons the session with
// p_stop[grade].
struct ClickChainModel {
  Vector p_click;  // indexed by grade
  Vector p_stop;

  int num_grades() const { return static_cast<int>(p_click.size()); }
  void validate() const;

  // Standard cascade parameterizations for 3-grade relevance; overridable via
  // experiment config.
  static ClickChainModel navigational();
  static ClickChainModel informational();
  static ClickChainModel by_name(const std::string& name);
};

// Simulates one session over items in ranked order. Two uniform draws are
// consumed per position regardless of the outcome, so sessions with coupled
// seeds stay aligned across parameter changes. Items after the first
// triggered stop are 0 (unvisited).
Vector simulate_clicks(const ClickChainModel& model, const std::vector<int>& grades,
                       std::uint64_t seed);

// Exact per-position click probability of the chain, by forward recursion
// over the survival probability. Oracle for the simulator.
Vector chain_click_probabilities(const ClickChainModel& model, const std::vector<int>& grades);

}  // namespace fedrecon

#endif  // FEDRECON_CLICKS_HPP
