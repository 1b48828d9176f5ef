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

#ifndef FEDRECON_ERROR_HPP
#define FEDRECON_ERROR_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fedrecon {

// Precondition / dimension violations on public operations.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values encountered mid-computation. Carries the last finite
// iterate when raised from an optimizer so callers can salvage it.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
  NumericError(const std::string& what, Eigen::VectorXd last_iterate)
      : std::runtime_error(what), last_good_iterate(std::move(last_iterate)) {}

  Eigen::VectorXd last_good_iterate;
};

// Malformed input data (LETOR lines, interaction logs). Stores the 1-based
// line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_number(0) {}

  long line_number;
};

// Invalid experiment / mechanism configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Metric is undefined for the given inputs (e.g. single-class AUC).
class MetricError : public std::runtime_error {
 public:
  explicit MetricError(const std::string& what) : std::runtime_error(what) {}
};

// Closed-form solver rank condition failed.
class RankConditionError : public std::runtime_error {
 public:
  explicit RankConditionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedrecon

#endif  // FEDRECON_ERROR_HPP
