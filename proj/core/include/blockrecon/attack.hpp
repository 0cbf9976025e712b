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

#ifndef BLOCKRECON_ATTACK_HPP_
#define BLOCKRECON_ATTACK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockrecon/ipcore.hpp"
#include "blockrecon/model.hpp"
#include "blockrecon/workload.hpp"

namespace blockrecon {

// A subset of household attributes, used both for histogram projections
// (solution variability) and for match keys (re-identification).
struct AttributeSet {
  bool size = false;
  bool children_count = false;
  bool child_presence = false;
  bool subsidized = false;
  bool bedrooms = false;
  uint32_t race_mask = 0;  // race flags included in the set
  std::string label;

  // All attributes the two statistical sources describe.
  static AttributeSet full(const RaceGroups& groups);
  // Size, bedrooms, one headline race flag, child presence: the coarse set a
  // re-identifier can buy without granular demographics.
  static AttributeSet simpler(int headline_group = 0);
  // Match-key presets by data source.
  static AttributeSet hud_key(const RaceGroups& groups);     // subsidized, bedrooms, race, child presence
  static AttributeSet broker_key(const RaceGroups& groups);  // race, child presence
  static AttributeSet sf1_key(const RaceGroups& groups);     // size, race, children count

  std::vector<int64_t> project(const HouseholdRecord& h) const;
};

struct AttackSpaceOptions {
  RaceGroups groups;
  int size_cap = 15;

  // Race-flag pattern policy. Every race statistic is a lower bound, so
  // adding flags never breaks a constraint: for feasibility questions the
  // single saturated pattern is exact, and for histogram questions over an
  // attribute set it suffices to enumerate subsets of the set's flags with
  // all other flags saturated (kCollapsed). kExhaustive enumerates every
  // nonempty pattern and is only tractable for small group counts.
  enum class Patterns { kSaturated, kCollapsed, kExhaustive };
  Patterns patterns = Patterns::kSaturated;
  uint32_t collapse_mask = 0;
};

// Unrestricted per-block space: all sizes up to the cap, children 0..size,
// unsubsidized configurations with no bedroom class and subsidized ones with
// each of the three classes, race patterns per the policy.
ConfigurationSpace build_attack_space(const AttackSpaceOptions& options);

// Support-restricted space for the likelihood attack: configurations seen in
// the state sample (positive empirical frequency), expanded over the
// subsidized/bedroom dimensions the sample does not observe.
ConfigurationSpace build_support_space(const StateTables& prior, int size_cap);

// Per-configuration negative log empirical likelihood. The prior covers only
// the census-side attributes, so the subsidized/bedroom expansion of one
// sample configuration shares one cost.
std::vector<double> mle_costs(const ConfigurationSpace& space, const StateTables& prior);

// Encodes the published statistics of one block over the given space:
// household and subsidized cardinalities, the size distribution with the
// residual relaxation, the person/children/race lower bounds, the
// subsidized-side statistics, and (optionally) the two occupancy-limit
// equations. Throws if a race statistic references a group no configuration
// carries.
IntegerProgram build_block_program(const BlockStatistics& stats, const ConfigurationSpace& space,
                                   std::span<const CountingQuery> workload, bool forbid_violations,
                                   const ViolationRule& rule = {});

struct DetectionResult {
  bool flagged = false;        // proof that every reconstruction has a violation
  bool undetermined = false;   // limits hit; treated as not flagged
  int64_t nodes = 0;
};

// A block is flagged when the occupancy-constrained program is proved
// infeasible. Hitting a limit is logged as undetermined, never as a flag.
DetectionResult detect_violation_block(const BlockStatistics& stats, const ConfigurationSpace& space,
                                       std::span<const CountingQuery> workload,
                                       const ViolationRule& rule = {}, const SolveLimits& limits = {});

// Feasibility of the unconstrained program (can the statistics be realized
// by any microdata at all). Noisy statistics can make this false.
bool block_reconstructable(const BlockStatistics& stats, const ConfigurationSpace& space,
                           std::span<const CountingQuery> workload, const SolveLimits& limits = {});

struct Reconstruction {
  std::string block_id;
  SolveStatus status = SolveStatus::kInfeasible;
  std::vector<int64_t> counts;  // aligned with the space used for the attack
  double objective = 0.0;
  std::vector<std::pair<size_t, int64_t>> violating;  // (config index, count)
  int64_t nodes = 0;
};

// Maximum-empirical-likelihood reconstruction over the support space.
// An infeasible result is a distinguished outcome (expected under noisy
// statistics) and routes callers to the soft variant.
Reconstruction reconstruct_mle(const BlockStatistics& stats, const ConfigurationSpace& space,
                               const StateTables& prior, std::span<const CountingQuery> workload,
                               const ViolationRule& rule = {}, const SolveLimits& limits = {});

struct ReconstructionSet {
  std::vector<Reconstruction> items;  // non-decreasing negative log-likelihood
  bool truncated = false;
  int64_t nodes = 0;
};

// Top-t most likely reconstructions via exclusion cuts.
ReconstructionSet reconstruct_topt(const BlockStatistics& stats, const ConfigurationSpace& space,
                                   const StateTables& prior, std::span<const CountingQuery> workload,
                                   int t, const ViolationRule& rule = {},
                                   const SolveLimits& limits = {});

// Soft reconstruction for noisy statistics: cardinalities stay hard, every
// statistic constraint moves into the objective as lambda times the squared
// sense violation (shortfall only for lower bounds), linearized exactly as a
// convex staircase over integer deviations. prior == nullptr drops the
// likelihood term (pure noisy constraint satisfaction).
Reconstruction reconstruct_soft(const BlockStatistics& stats, const ConfigurationSpace& space,
                                const StateTables* prior, double lambda,
                                std::span<const CountingQuery> workload,
                                const ViolationRule& rule = {}, const SolveLimits& limits = {});

// Top-t soft reconstructions (exclusion cuts on the household counts only;
// deviation bookkeeping is free to differ).
ReconstructionSet reconstruct_soft_topt(const BlockStatistics& stats,
                                        const ConfigurationSpace& space, const StateTables* prior,
                                        double lambda, std::span<const CountingQuery> workload,
                                        int t, const ViolationRule& rule = {},
                                        const SolveLimits& limits = {});

enum class HouseholdSubset : uint8_t { kAll, kSubsidized, kViolating };

inline const char* subset_name(HouseholdSubset s) {
  switch (s) {
    case HouseholdSubset::kAll: return "all";
    case HouseholdSubset::kSubsidized: return "subsidized";
    default: return "violating";
  }
}

struct SolvarReport {
  int64_t raw = 0;
  double normalized = 0.0;  // raw / (2 |D*|); NaN when the denominator is zero
  std::string attrs_label;
  HouseholdSubset subset = HouseholdSubset::kAll;
  bool exact = false;  // false: limits stopped the search, raw is a lower bound
  int64_t denominator = 0;
};

// Maximum L1 distance between the reference reconstruction's histogram over
// `attrs` (filtered to `subset`) and any reconstruction consistent with the
// statistics. The program is built without the occupancy constraints: the
// attacker measures certainty over everything the statistics allow.
SolvarReport solution_variability(const Reconstruction& reference,
                                  const ConfigurationSpace& reference_space,
                                  const BlockStatistics& stats, const ConfigurationSpace& space,
                                  std::span<const CountingQuery> workload, const AttributeSet& attrs,
                                  HouseholdSubset subset, const ViolationRule& rule = {},
                                  const SolveLimits& limits = {});

}  // namespace blockrecon

#endif  // BLOCKRECON_ATTACK_HPP_
