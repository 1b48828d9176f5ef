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

#include "fedrecon/clicks.hpp"

#include "fedrecon/rng.hpp"

namespace fedrecon {

void ClickChainModel::validate() const {
  require(p_click.size() == p_stop.size(), "click model: p_click/p_stop length mismatch");
  require(p_click.size() > 0, "click model: empty grade range");
  require(p_click.minCoeff() >= 0 && p_click.maxCoeff() <= 1 && p_stop.minCoeff() >= 0 &&
              p_stop.maxCoeff() <= 1,
          "click model: probabilities must lie in [0,1]");
}

ClickChainModel ClickChainModel::navigational() {
  ClickChainModel m;
  m.p_click = Vector(3);
  m.p_click << 0.05, 0.5, 0.95;
  m.p_stop = Vector(3);
  m.p_stop << 0.2, 0.5, 0.9;
  return m;
}

ClickChainModel ClickChainModel::informational() {
  ClickChainModel m;
  m.p_click = Vector(3);
  m.p_click << 0.4, 0.7, 0.9;
  m.p_stop = Vector(3);
  m.p_stop << 0.1, 0.3, 0.5;
  return m;
}

ClickChainModel ClickChainModel::by_name(const std::string& name) {
  if (name == "navigational") return navigational();
  if (name == "informational") return informational();
  throw ConfigError("unknown click model '" + name + "'");
}

Vector simulate_clicks(const ClickChainModel& model, const std::vector<int>& grades,
                       std::uint64_t seed) {
  model.validate();
  Vector clicks = Vector::Zero(grades.size());
  Rng rng(seed);
  bool stopped = false;
  for (std::size_t i = 0; i < grades.size(); ++i) {
    int g = grades[i];
    require(g >= 0 && g < model.num_grades(), "simulate_clicks: grade out of model range");
    double u_click = rng.uniform();
    double u_stop = rng.uniform();
    if (stopped) continue;  // draws still consumed to keep streams aligned
    if (u_click < model.p_click[g]) {
      clicks[i] = 1.0;
      if (u_stop < model.p_stop[g]) stopped = true;
    }
  }
  return clicks;
}

Vector chain_click_probabilities(const ClickChainModel& model, const std::vector<int>& grades) {
  model.validate();
  Vector p(grades.size());
  double reach = 1.0;
  for (std::size_t i = 0; i < grades.size(); ++i) {
    int g = grades[i];
    p[i] = reach * model.p_click[g];
    reach *= 1.0 - model.p_click[g] * model.p_stop[g];
  }
  return p;
}

}  // namespace fedrecon
