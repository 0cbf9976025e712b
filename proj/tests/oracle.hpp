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
//
// Independent reference implementations the production code is checked
// against. Everything here favors obviousness over speed: exhaustive
// enumeration, direct rule transcription, series summation.

#ifndef BLOCKRECON_TESTS_ORACLE_HPP_
#define BLOCKRECON_TESTS_ORACLE_HPP_

#include <cstdint>
#include <vector>

#include "blockrecon/ipcore.hpp"
#include "blockrecon/model.hpp"
#include "blockrecon/rng.hpp"
#include "blockrecon/workload.hpp"

namespace blockrecon::testing {

// Every feasible count vector of the program, found by walking the whole
// box with an odometer. No relaxation, no pruning.
struct OracleSolutions {
  std::vector<std::vector<int64_t>> feasible;  // lexicographic order
  std::vector<double> objectives;              // aligned; empty when no objective
  std::vector<size_t> ranked;                  // indices sorted by (objective, lex)
};

OracleSolutions enumerate_all(const IntegerProgram& ip);

// Full-assignment consistency with published statistics, transcribed from
// the statistics semantics: exact household and subsidized totals, size
// bins as lower bounds with the residual rule, person/children/race lower
// bounds, the subsidized-side rows, and (optionally) zero over-occupied
// units.
bool assignment_consistent(const std::vector<HouseholdRecord>& households,
                           const BlockStatistics& stats, const RaceGroups& groups,
                           bool forbid_violations, const ViolationRule& rule = {});

// All consistent multisets of households drawn from `configs`, as count
// vectors aligned with `configs`. DFS over counts with partial-sum bounds.
std::vector<std::vector<int64_t>> enumerate_consistent(const BlockStatistics& stats,
                                                       const std::vector<HouseholdRecord>& configs,
                                                       const RaceGroups& groups,
                                                       bool forbid_violations,
                                                       const ViolationRule& rule = {});

// Exact discrete Gaussian (pmf proportional to exp(-x^2 / (2 sigma2)))
// by direct series summation.
double dgauss_pmf(int64_t x, double sigma2);
double dgauss_variance(double sigma2);

// Chi-square goodness-of-fit p-value of integer samples against the exact
// pmf, pooling bins until every expected count is at least five.
double dgauss_chi_square_pvalue(const std::vector<int64_t>& samples, double sigma2);

// Small random programs for solver battles. Constraints are anchored near a
// random interior point so a healthy share of instances is feasible.
IntegerProgram random_micro_instance(Rng& rng, bool with_objective, int max_vars = 6,
                                     int64_t max_count = 5);

}  // namespace blockrecon::testing

#endif  // BLOCKRECON_TESTS_ORACLE_HPP_
