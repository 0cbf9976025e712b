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

#include "blockrecon/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace blockrecon {

SwapConfig::SwapConfig() { multiplier = 0.10 / tier_mass(); }

SwapConfig SwapConfig::for_target_rate(double rate) {
  SwapConfig c;
  c.multiplier = rate / c.tier_mass();
  return c;
}

double SwapConfig::tier_mass() const {
  double mass = 0.0;
  double prev = 0.0;
  for (const auto& t : tiers) {
    mass += (t.cum_fraction - prev) * t.probability;
    prev = t.cum_fraction;
  }
  return mass;
}

double SwapConfig::expected_rate() const { return tier_mass() * multiplier; }

void SwapConfig::validate() const {
  if (tiers.empty()) throw std::invalid_argument("swap config: no tiers");
  double prev = 0.0;
  for (const auto& t : tiers) {
    if (t.cum_fraction <= prev) {
      throw std::invalid_argument("swap config: tier fractions must be strictly increasing");
    }
    if (t.probability < 0.0 || t.probability > 1.0) {
      throw std::invalid_argument("swap config: tier probabilities must lie in [0, 1]");
    }
    prev = t.cum_fraction;
  }
  if (std::abs(prev - 1.0) > 1e-12) {
    throw std::invalid_argument("swap config: tiers must end at 100%");
  }
  if (multiplier < 0.0) throw std::invalid_argument("swap config: negative multiplier");
  for (const auto& t : tiers) {
    if (t.probability * multiplier > 1.0 + 1e-12) {
      throw std::invalid_argument("swap config: multiplier pushes a tier probability above 1");
    }
  }
  if (candidate_pool < 1) throw std::invalid_argument("swap config: candidate pool must be >= 1");
  if (swap_key != "size_adults") {
    throw std::invalid_argument("swap config: unsupported swap key '" + swap_key + "'");
  }
}

namespace {

struct HouseholdSlot {
  int32_t block = 0;
  int32_t index = 0;
};

// Full attribute tuple used for the risk ranking.
using AttrTuple = std::tuple<int, uint32_t, int, bool, BedroomClass>;

AttrTuple attr_tuple(const HouseholdRecord& h) {
  return {h.size, h.race_flags, h.children, h.subsidized, h.bedrooms};
}

// Swap key: household size and number of adults. Since adults = size -
// children, partners agree on children too; everything else is exchanged.
using SwapKey = std::pair<int, int>;

SwapKey swap_key_of(const HouseholdRecord& h) { return {h.size, h.adults()}; }

void swap_state(Universe& universe, const std::vector<int32_t>& state_blocks,
                const SwapConfig& config, Rng& rng, SwapOutcome& outcome) {
  std::vector<HouseholdSlot> slots;
  std::map<AttrTuple, int64_t> tuple_counts;
  std::map<SwapKey, std::vector<HouseholdSlot>> by_key;
  std::map<int32_t, int64_t> block_population;
  for (int32_t b : state_blocks) {
    const Block& block = universe.blocks[static_cast<size_t>(b)];
    block_population[b] = block.population();
    for (size_t i = 0; i < block.households.size(); ++i) {
      HouseholdSlot slot{b, static_cast<int32_t>(i)};
      slots.push_back(slot);
      ++tuple_counts[attr_tuple(block.households[i])];
      by_key[swap_key_of(block.households[i])].push_back(slot);
    }
  }
  outcome.households += static_cast<int64_t>(slots.size());
  if (slots.empty()) return;

  // Rank: rarest full attribute tuple first, then least populous block.
  std::sort(slots.begin(), slots.end(), [&](const HouseholdSlot& a, const HouseholdSlot& b) {
    const auto& ha = universe.blocks[static_cast<size_t>(a.block)].households[a.index];
    const auto& hb = universe.blocks[static_cast<size_t>(b.block)].households[b.index];
    int64_t ua = tuple_counts[attr_tuple(ha)];
    int64_t ub = tuple_counts[attr_tuple(hb)];
    if (ua != ub) return ua < ub;
    if (block_population[a.block] != block_population[b.block]) {
      return block_population[a.block] < block_population[b.block];
    }
    if (a.block != b.block) return a.block < b.block;
    return a.index < b.index;
  });

  const double m = static_cast<double>(slots.size());
  for (size_t rank = 0; rank < slots.size(); ++rank) {
    double position = (static_cast<double>(rank) + 1.0) / m;
    double prob = config.tiers.back().probability;
    for (const auto& tier : config.tiers) {
      if (position <= tier.cum_fraction + 1e-15) {
        prob = tier.probability;
        break;
      }
    }
    prob = std::min(1.0, prob * config.multiplier);
    if (!rng.bernoulli(prob)) continue;
    ++outcome.selected;

    const HouseholdSlot me = slots[rank];
    HouseholdRecord& mine = universe.blocks[static_cast<size_t>(me.block)].households[me.index];
    const auto& pool = by_key[swap_key_of(mine)];

    // Geographically closest key matches outside the household's own block.
    const Block& my_block = universe.blocks[static_cast<size_t>(me.block)];
    std::vector<std::pair<double, HouseholdSlot>> near;
    for (const auto& cand : pool) {
      if (cand.block == me.block) continue;
      const Block& cb = universe.blocks[static_cast<size_t>(cand.block)];
      double dx = cb.x - my_block.x;
      double dy = cb.y - my_block.y;
      near.emplace_back(dx * dx + dy * dy, cand);
    }
    if (near.empty()) {
      ++outcome.skipped;
      continue;
    }
    size_t pool_size = std::min(near.size(), static_cast<size_t>(config.candidate_pool));
    std::partial_sort(near.begin(), near.begin() + static_cast<ptrdiff_t>(pool_size), near.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first < b.first;
                        if (a.second.block != b.second.block) return a.second.block < b.second.block;
                        return a.second.index < b.second.index;
                      });
    const HouseholdSlot partner = near[rng.below(pool_size)].second;
    HouseholdRecord& other =
        universe.blocks[static_cast<size_t>(partner.block)].households[partner.index];

    // Exchange all non-key attributes; size and children are pinned by the key.
    std::swap(mine.race_flags, other.race_flags);
    std::swap(mine.subsidized, other.subsidized);
    std::swap(mine.bedrooms, other.bedrooms);
    ++outcome.exchanged;
  }
}

}  // namespace

Universe swap_households(const Universe& universe, const SwapConfig& config, uint64_t seed,
                         SwapOutcome* outcome) {
  config.validate();
  Universe swapped = universe;
  std::map<int, std::vector<int32_t>> by_state;
  for (size_t b = 0; b < swapped.blocks.size(); ++b) {
    by_state[swapped.blocks[b].state].push_back(static_cast<int32_t>(b));
  }
  SwapOutcome total;
  for (auto& [state, blocks] : by_state) {
    Rng rng(derive_seed(seed, "swap", static_cast<uint64_t>(state)));
    swap_state(swapped, blocks, config, rng, total);
  }
  swapped.log.swap_skips += total.skipped;
  if (outcome != nullptr) *outcome = total;
  return swapped;
}

// --- Budget replication -----------------------------------------------------

StrategyCatalogue StrategyCatalogue::production() {
  StrategyCatalogue cat;
  {
    // Household-size path: the size variable sits inside a detailed composite
    // crossed with four demographic axes.
    StrategyQuery s;
    s.name = "SEX*HISP*HHTENSHORT_3LEV*RACE*DETAILEDCOUPLETYPEMULTGENDETOWNCHILDSIZE";
    s.fraction = Rational(1, 5000);  // 0.0002
    s.terms.push_back({"SEX", 2, {}});
    s.terms.push_back({"HISP", 2, {}});
    s.terms.push_back({"HHTENSHORT_3LEV", 3, {}});
    s.terms.push_back({"RACE", 7, {}});
    s.terms.push_back({"DETAILEDCOUPLETYPEMULTGENDETOWNCHILDSIZE", 280, {{"HH_SIZE", 40}}});
    cat.strategies.push_back(std::move(s));
  }
  {
    // The fully detailed histogram also answers household size, but through
    // vastly more cells; the maximum rule never picks it.
    StrategyQuery s;
    s.name = "DETAILED";
    s.fraction = Rational(1, 1000);
    s.terms.push_back({"DETAILED", 336000, {{"HH_SIZE", 48000}}});
    cat.strategies.push_back(std::move(s));
  }
  {
    StrategyQuery s;
    s.name = "HHRACEETH*HHTENSHORT_2LEV";
    s.fraction = Rational(1, 5000);
    s.terms.push_back({"HHRACEETH", 8, {{"HH_RACEETH", 1}}});
    s.terms.push_back({"HHTENSHORT_2LEV", 2, {}});
    cat.strategies.push_back(std::move(s));
  }
  {
    StrategyQuery s;
    s.name = "CHILDPRESENCE*HHSEX";
    s.fraction = Rational(1, 5000);
    s.terms.push_back({"CHILDPRESENCE", 2, {{"CHILDREN", 1}}});
    s.terms.push_back({"HHSEX", 2, {}});
    cat.strategies.push_back(std::move(s));
  }
  return cat;
}

Rational allocate_budget(const StrategyCatalogue& catalogue, const std::string& target) {
  bool found = false;
  Rational best;
  for (const auto& strategy : catalogue.strategies) {
    for (size_t t = 0; t < strategy.terms.size(); ++t) {
      auto it = strategy.terms[t].margin_cells.find(target);
      if (it == strategy.terms[t].margin_cells.end()) continue;
      int64_t cells = it->second;
      for (size_t o = 0; o < strategy.terms.size(); ++o) {
        if (o != t) cells *= strategy.terms[o].cardinality;
      }
      Rational alloc = strategy.fraction / Rational(cells);
      if (!found || alloc > best) {
        best = alloc;
        found = true;
      }
    }
  }
  if (!found) {
    throw std::invalid_argument("allocate_budget: no strategy covers target query '" + target +
                                "'");
  }
  return best;
}

Rational PrivacyBudget::variance_for(const std::string& query_id) const {
  auto it = allocations.find(query_id);
  if (it == allocations.end()) {
    throw std::out_of_range("privacy budget: no allocation for query '" + query_id + "'");
  }
  const Rational& rho = it->second.table == BudgetTable::kPerson ? rho_person : rho_household;
  return (it->second.fraction * rho).reciprocal();
}

PrivacyBudget PrivacyBudget::production_default(const RaceGroups& groups) {
  PrivacyBudget b;
  StrategyCatalogue cat = StrategyCatalogue::production();
  Rational size_alloc = allocate_budget(cat, "HH_SIZE");
  Rational race_alloc = allocate_budget(cat, "HH_RACEETH");
  Rational child_alloc = allocate_budget(cat, "CHILDREN");
  for (int x = 1; x <= 6; ++x) {
    b.allocations[size_query_id(x)] = {size_alloc, BudgetTable::kHousehold};
  }
  b.allocations[kQuerySize7Plus] = {size_alloc, BudgetTable::kHousehold};
  for (int g = 0; g < groups.count; ++g) {
    b.allocations[race_query_id(g)] = {race_alloc, BudgetTable::kHousehold};
  }
  // Children are counted from the person-side tables.
  b.allocations[kQueryChildren] = {child_alloc, BudgetTable::kPerson};
  return b;
}

PrivacyBudget PrivacyBudget::uniform(const Rational& rho, const RaceGroups& groups,
                                     bool include_hud) {
  PrivacyBudget b;
  b.rho_person = rho;
  b.rho_household = rho;
  std::vector<std::string> ids;
  for (int x = 1; x <= 6; ++x) ids.push_back(size_query_id(x));
  ids.push_back(kQuerySize7Plus);
  for (int g = 0; g < groups.count; ++g) ids.push_back(race_query_id(g));
  ids.push_back(kQueryChildren);
  if (include_hud) {
    ids.push_back(kQueryHudPopulation);
    for (int g = 0; g < groups.count; ++g) {
      if (g != groups.hispanic) ids.push_back(hud_race_query_id(g));
    }
    ids.push_back(kQueryHudHispanic);
    ids.push_back(kQueryHudChildren);
    for (BedroomClass bc : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
      ids.push_back(hud_bedrooms_query_id(bc));
    }
  }
  Rational share(1, static_cast<int64_t>(ids.size()));
  for (const auto& id : ids) {
    b.allocations[id] = {share, BudgetTable::kHousehold};
  }
  return b;
}

// --- Post-processing ----------------------------------------------------------

namespace {

// Largest-remainder apportionment of `target` over non-negative values;
// remainder ties (and the all-zero case) resolve in family order.
std::vector<int64_t> apportion(const std::vector<int64_t>& values, int64_t target) {
  const size_t n = values.size();
  std::vector<int64_t> out(n, 0);
  if (n == 0 || target <= 0) return out;
  int64_t total = 0;
  for (int64_t v : values) total += v;
  if (total <= 0) {
    // No proportions to follow; hand out seats round-robin in family order.
    for (int64_t k = 0; k < target; ++k) out[static_cast<size_t>(k) % n] += 1;
    return out;
  }
  int64_t assigned = 0;
  std::vector<std::pair<int64_t, size_t>> remainders;  // (-remainder, index) for stable order
  for (size_t i = 0; i < n; ++i) {
    __int128 scaled = static_cast<__int128>(values[i]) * target;
    out[i] = static_cast<int64_t>(scaled / total);
    assigned += out[i];
    remainders.emplace_back(-static_cast<int64_t>(scaled % total), i);
  }
  std::sort(remainders.begin(), remainders.end());
  for (int64_t k = 0; k < target - assigned; ++k) {
    out[remainders[static_cast<size_t>(k)].second] += 1;
  }
  return out;
}

std::vector<std::string> size_family_ids(const BlockStatistics& s) {
  std::vector<std::string> ids;
  for (int x = 1; x <= 6; ++x) {
    if (s.find(size_query_id(x)) != nullptr) ids.push_back(size_query_id(x));
  }
  if (s.find(kQuerySize7Plus) != nullptr) ids.push_back(kQuerySize7Plus);
  return ids;
}

std::vector<std::string> race_family_ids(const BlockStatistics& s) {
  std::vector<std::string> ids;
  for (int g = 0; g < 32; ++g) {
    if (s.find(race_query_id(g)) != nullptr) ids.push_back(race_query_id(g));
  }
  return ids;
}

void rescale_family(BlockStatistics& s, const std::vector<std::string>& ids, int64_t target) {
  if (ids.empty()) return;
  std::vector<int64_t> values;
  values.reserve(ids.size());
  for (const auto& id : ids) values.push_back(s.answer(id));
  std::vector<int64_t> scaled = apportion(values, target);
  for (size_t i = 0; i < ids.size(); ++i) s.upsert(ids[i], Sense::kEq).answer = scaled[i];
}

}  // namespace

BlockStatistics post_process(const BlockStatistics& noisy, int64_t invariant_occupied) {
  if (invariant_occupied < 0) {
    throw std::invalid_argument("post_process: invariant must be non-negative");
  }
  BlockStatistics s = noisy;
  for (auto& r : s.rows) r.answer = std::max<int64_t>(0, r.answer);

  rescale_family(s, size_family_ids(s), invariant_occupied);
  rescale_family(s, race_family_ids(s), invariant_occupied);

  // Aggregates, bottom-up: population from the size distribution with the
  // open top bin counted at 7, then the child count capped by population.
  if (s.find(kQueryPopulation) != nullptr) {
    int64_t pop = 0;
    for (int x = 1; x <= 6; ++x) {
      if (const auto* row = s.find(size_query_id(x))) pop += row->answer * x;
    }
    if (const auto* row = s.find(kQuerySize7Plus)) pop += row->answer * 7;
    s.upsert(kQueryPopulation, Sense::kGe).answer = pop;
  }
  if (s.find(kQueryChildren) != nullptr && s.find(kQueryPopulation) != nullptr) {
    int64_t pop = s.answer(kQueryPopulation);
    auto& children = s.upsert(kQueryChildren, Sense::kGe);
    children.answer = std::min(children.answer, pop);
  }
  return s;
}

BlockStatistics apply_dp(const BlockStatistics& stats, const PrivacyBudget& budget, Rng& rng) {
  BlockStatistics noisy = stats;

  // Make the top size bin explicit so the size family partitions the
  // occupied-units invariant.
  if (noisy.find(kQuerySize7Plus) == nullptr) {
    int64_t reported = 0;
    for (int x = 1; x <= 6; ++x) {
      if (const auto* row = noisy.find(size_query_id(x))) reported += row->answer;
    }
    noisy.upsert(kQuerySize7Plus, Sense::kEq).answer = std::max<int64_t>(0, noisy.n_total - reported);
  }

  for (auto& row : noisy.rows) {
    auto it = budget.allocations.find(row.query_id);
    if (it == budget.allocations.end()) continue;
    Rational variance = budget.variance_for(row.query_id);
    row.answer = discrete_gaussian(row.answer, variance, rng);
  }
  return post_process(noisy, stats.n_total);
}

}  // namespace blockrecon
