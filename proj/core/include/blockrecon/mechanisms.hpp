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

#ifndef BLOCKRECON_MECHANISMS_HPP_
#define BLOCKRECON_MECHANISMS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blockrecon/model.hpp"
#include "blockrecon/rational.hpp"
#include "blockrecon/rng.hpp"
#include "blockrecon/workload.hpp"

namespace blockrecon {

// --- Targeted random swapping -------------------------------------------

struct SwapTier {
  double cum_fraction = 1.0;  // cumulative share of the ranked households
  double probability = 0.0;   // selection probability inside the tier
};

// Households are ranked most-at-risk first (rare attribute combinations in
// small blocks); tier probabilities fall off down the ranking and the global
// multiplier scales the realized rate. Swap partners must match on the key
// (household size, number of adults); every non-key attribute is exchanged.
struct SwapConfig {
  std::vector<SwapTier> tiers = {{0.005, 1.0}, {0.20, 0.6}, {0.50, 0.3}, {1.00, 0.1}};
  double multiplier = 0.0;  // defaulted by for_target_rate(0.10)
  int candidate_pool = 5;
  std::string swap_key = "size_adults";

  SwapConfig();
  static SwapConfig for_target_rate(double rate);
  // Expected fraction of households selected: sum of tier width x tier
  // probability x multiplier.
  double expected_rate() const;
  double tier_mass() const;
  void validate() const;
};

struct SwapOutcome {
  int64_t households = 0;
  int64_t selected = 0;
  int64_t exchanged = 0;
  int64_t skipped = 0;  // selected but no key-matching partner in the state
};

// Applies the swapping procedure state by state (deterministic per seed).
Universe swap_households(const Universe& universe, const SwapConfig& config, uint64_t seed,
                         SwapOutcome* outcome = nullptr);

// --- Privacy budget replication -------------------------------------------

// One multiplicative term of a strategy query's cross-tabulation. cardinality
// is the number of its cells; margin_cells says how many of them must be
// summed to recover one value of a named target variable.
struct StrategyTerm {
  std::string name;
  int64_t cardinality = 1;
  std::map<std::string, int64_t> margin_cells;
};

struct StrategyQuery {
  std::string name;
  Rational fraction;  // share of the table budget allocated to this strategy
  std::vector<StrategyTerm> terms;
};

struct StrategyCatalogue {
  std::vector<StrategyQuery> strategies;
  // Encoded production allocations; reproduces the documented per-query
  // shares for household size (0.0002/3360) and race/children (0.0002/2).
  static StrategyCatalogue production();
};

// Highest adjusted allocation c_i / M_qi over every strategy that can answer
// the target variable, where M_qi is the number of crosstab cells summed to
// marginalize it. Throws when no strategy covers the target.
Rational allocate_budget(const StrategyCatalogue& catalogue, const std::string& target);

enum class BudgetTable : uint8_t { kPerson, kHousehold };

struct PrivacyBudget {
  Rational rho_person{124, 25};    // 4.96
  Rational rho_household{77, 10};  // 7.70

  struct Allocation {
    Rational fraction;  // c_q
    BudgetTable table = BudgetTable::kHousehold;
  };
  // Noised query set: census-side size bins (plus the 7+ bin), race groups,
  // children. Queries absent from the map are published exactly.
  std::map<std::string, Allocation> allocations;

  Rational variance_for(const std::string& query_id) const;  // 1 / (c_q * rho)

  // Production-like allocation from the strategy catalogue.
  static PrivacyBudget production_default(const RaceGroups& groups);
  // One global budget split uniformly over the noised queries; optionally
  // also covers the subsidized-side statistics.
  static PrivacyBudget uniform(const Rational& rho, const RaceGroups& groups, bool include_hud);
};

// --- Discrete Gaussian mechanism -------------------------------------------

// value + Z, Z drawn from the discrete Gaussian on the integers with the
// given variance, by exact rejection sampling from discrete Laplace
// proposals. No floating-point rounding anywhere in the sampling path.
int64_t discrete_gaussian(int64_t value, const Rational& variance, Rng& rng);

// Noise sample alone (mean zero).
int64_t discrete_gaussian_noise(const Rational& variance, Rng& rng);

// --- Post-processing ---------------------------------------------------------

// Bottom-up consistency repair: clip negatives, rescale the size and race
// families to the occupied-units invariant (largest-remainder apportionment,
// remainder ties broken in family order), rebuild the population from the
// size distribution (top bin counted at size 7), cap children by population.
BlockStatistics post_process(const BlockStatistics& noisy, int64_t invariant_occupied);

// Applies the discrete Gaussian mechanism to every allocated query of one
// block, then post-processes. Totals (occupied units, subsidized count) are
// invariant. The output gains an explicit 7+ size bin row.
BlockStatistics apply_dp(const BlockStatistics& stats, const PrivacyBudget& budget, Rng& rng);

}  // namespace blockrecon

#endif  // BLOCKRECON_MECHANISMS_HPP_
