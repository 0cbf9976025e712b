// Copyright 2026 The blockrecon Authors
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

#ifndef BLOCKRECON_IPCORE_HPP_
#define BLOCKRECON_IPCORE_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockrecon/model.hpp"

namespace blockrecon {

// Enumerated set of distinct household configurations admitted for a block.
// A reconstruction is a vector of non-negative counts over this space.
class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;
  explicit ConfigurationSpace(std::vector<HouseholdRecord> configs);

  size_t size() const { return configs_.size(); }
  const HouseholdRecord& at(size_t i) const { return configs_[i]; }
  std::span<const HouseholdRecord> configs() const { return configs_; }
  std::optional<size_t> find(const HouseholdRecord& c) const;

 private:
  std::vector<HouseholdRecord> configs_;  // sorted, distinct, validated
};

enum class ConstraintSense : uint8_t { kLe, kGe, kEq };

struct LinearConstraint {
  std::vector<std::pair<int32_t, int64_t>> terms;  // (variable, integer coefficient)
  ConstraintSense sense = ConstraintSense::kEq;
  int64_t rhs = 0;
  std::string label;
  // Symmetry-breaking rows (e.g. orderings among interchangeable unit
  // variables) are enforced in propagation and feasibility checks but left
  // out of the relaxation, where they only add size.
  bool lp_skip = false;
};

enum class SolveStatus : uint8_t { kOptimal, kFeasible, kInfeasible, kBoundReached };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasible: return "feasible";
    case SolveStatus::kInfeasible: return "infeasible";
    default: return "bound_reached";
  }
}

// Arithmetic used for the relaxation bounding. Exact mode runs the simplex on
// rationals; float mode runs on doubles and only prunes with a safety margin,
// so a bound within the margin of an integer is never trusted. Auto switches
// on problem size.
enum class Arithmetic : uint8_t { kAuto, kExact, kFloat };

struct SolveLimits {
  int64_t max_nodes = 2'000'000;       // per solve
  int64_t max_total_nodes = 0;         // across an enumeration; 0 = unlimited
  Arithmetic arithmetic = Arithmetic::kAuto;
};

// Count-vector integer program: non-negative integer variables with upper
// bounds, integer-coefficient linear constraints, an optional linear
// objective (minimized), and a list of forbidden solutions.
struct IntegerProgram {
  std::vector<int64_t> upper;
  std::vector<LinearConstraint> constraints;
  std::vector<double> objective;                 // empty = feasibility problem
  std::vector<std::vector<int64_t>> exclusions;  // forbidden count-vector prefixes
  // Number of leading variables an exclusion pins (0 = all of them). Lets a
  // model with auxiliary bookkeeping variables forbid a solution regardless
  // of how the bookkeeping is filled in.
  size_t exclusion_arity = 0;

  size_t num_vars() const { return upper.size(); }
  bool has_objective() const { return !objective.empty(); }
  size_t arity() const { return exclusion_arity == 0 ? num_vars() : exclusion_arity; }

  // Exact integer feasibility check (ignores exclusions).
  bool satisfies(std::span<const int64_t> x) const;
  bool is_excluded(std::span<const int64_t> x) const;
  double objective_value(std::span<const int64_t> x) const;
  void validate() const;
};

struct Solution {
  SolveStatus status = SolveStatus::kInfeasible;
  std::vector<int64_t> counts;
  double objective = 0.0;
  int64_t nodes = 0;
};

// Branch and bound over the box of count vectors, bounding with the linear
// relaxation. Returns kOptimal with a proof of optimality (kFeasible for
// feasibility-only programs), kInfeasible only after exhausting the search,
// and kBoundReached when limits were hit; kBoundReached carries the best
// incumbent found, if any, and is never an infeasibility claim.
Solution solve(const IntegerProgram& ip, const SolveLimits& limits = {});

struct TopSolutions {
  std::vector<Solution> solutions;  // non-decreasing objective
  bool truncated = false;           // a limit cut the enumeration short
  int64_t nodes = 0;
};

// Up to t optimal solutions, each found by re-solving with an exclusion cut
// forbidding every previously returned vector; stops when the remaining
// program is infeasible.
TopSolutions enumerate_top(const IntegerProgram& ip, int t, const SolveLimits& limits = {});

// Histogram cell structure for the L1 objective: cell_of maps each variable
// to a cell index (-1 = not counted), reference is the per-cell histogram of
// the reference solution. When every feasible solution puts the same total
// mass into the histogram (a full partition of a fixed cardinality), set
// conserved_mass: the distance then equals twice (mass minus overlap) and the
// search only needs one selector per populated reference cell.
struct L1Objective {
  std::vector<int32_t> cell_of;
  std::vector<int64_t> reference;
  std::optional<int64_t> conserved_mass;
};

struct L1Result {
  int64_t value = 0;
  bool exact = false;  // false when limits stopped the search: value is a lower bound
  int64_t nodes = 0;
};

// Maximum L1 distance between the reference histogram and the histogram of
// any feasible solution of ip. Linearized with one deviation variable and one
// 0/1 side selector per cell; a plain positive/negative split is exact only
// when minimizing, so the selector is what keeps the maximization honest.
L1Result maximize_l1(const IntegerProgram& ip, const L1Objective& objective,
                     const SolveLimits& limits = {});

// Text export in LP format for cross-checking against third-party solvers.
void write_lp(const IntegerProgram& ip, std::ostream& out);

}  // namespace blockrecon

#endif  // BLOCKRECON_IPCORE_HPP_
