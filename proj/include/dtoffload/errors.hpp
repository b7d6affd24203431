// Copyright 2026 The dtoffload Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DTOFFLOAD_ERRORS_HPP_
#define DTOFFLOAD_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtoff {

// Bad generator / training / CLI configuration.
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A formula evaluated outside its domain (non-positive workload, bandwidth...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a precondition: dimension mismatch, label outside {0,1}, ...
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed document. `where` is a byte offset or a JSON pointer.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string where)
      : std::runtime_error(what + " (at " + where + ")"), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Document parsed but the scenario it describes violates invariants.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid scenario:";
    for (const auto& s : v) out += " [" + s + "]";
    return out;
  }
  std::vector<std::string> violations_;
};

// A DT owns more devices than the feature tensor has slots for.
class CapacityError : public std::runtime_error {
 public:
  CapacityError(int dt, int devices, int slots)
      : std::runtime_error("DT " + std::to_string(dt) + " has " + std::to_string(devices) +
                           " devices but only " + std::to_string(slots) + " slots"),
        dt_(dt) {}
  int dt() const noexcept { return dt_; }

 private:
  int dt_;
};

// Exhaustive search would scan more decisions than the cap allows.
class InfeasibleEnumeration : public std::runtime_error {
 public:
  InfeasibleEnumeration(std::uint64_t count, std::uint64_t cap, bool overflowed)
      : std::runtime_error("exhaustive search needs " +
                           (overflowed ? std::string("more than 2^64") : std::to_string(count)) +
                           " decisions, cap is " + std::to_string(cap)),
        count_(count) {}
  std::uint64_t count() const noexcept { return count_; }

 private:
  std::uint64_t count_;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A training run inside an experiment grid failed; wraps the original message.
class GridPointError : public std::runtime_error {
 public:
  GridPointError(int index, const std::string& label, const std::string& cause)
      : std::runtime_error("grid point " + std::to_string(index) + " (" + label + "): " + cause),
        index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

}  // namespace dtoff

#endif  // DTOFFLOAD_ERRORS_HPP_
