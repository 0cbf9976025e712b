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

#include <doctest.h>

#include <cmath>
#include <map>

#include "blockrecon/mechanisms.hpp"
#include "blockrecon/model.hpp"
#include "blockrecon/workload.hpp"
#include "oracle.hpp"

namespace {

using namespace blockrecon;
namespace oracle = blockrecon::testing;

TEST_SUITE_BEGIN("mechanisms");

TEST_CASE("swap with zero multiplier is the identity") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 20;
  cfg.super_households = 1500;
  Universe u = generate_universe(cfg, 60);
  SwapConfig sc;
  sc.multiplier = 0.0;
  SwapOutcome outcome;
  Universe swapped = swap_households(u, sc, 7, &outcome);
  CHECK(outcome.selected == 0);
  for (size_t b = 0; b < u.blocks.size(); ++b) {
    CHECK(u.blocks[b].households == swapped.blocks[b].households);
  }
}

TEST_CASE("forced swap exchanges non-key attributes and preserves the key") {
  // Two single-household blocks with the same (size, adults) key but
  // different race/subsidy/bedroom attributes.
  Universe u;
  u.n_groups = 2;
  u.hispanic_group = 1;
  Block a;
  a.id = "s00b000000";
  a.state = 0;
  a.x = 0.1;
  a.y = 0.1;
  HouseholdRecord ha;
  ha.size = 3;
  ha.children = 1;
  ha.race_flags = 1;
  ha.subsidized = true;
  ha.bedrooms = BedroomClass::kLe1;
  a.households = {ha};
  Block b;
  b.id = "s00b000001";
  b.state = 0;
  b.x = 0.9;
  b.y = 0.9;
  HouseholdRecord hb;
  hb.size = 3;
  hb.children = 1;
  hb.race_flags = 2;
  hb.subsidized = false;
  hb.bedrooms = BedroomClass::kNone;
  b.households = {hb};
  u.blocks = {a, b};

  SwapConfig sc;
  // Only the top-ranked household is selected, so exactly one exchange
  // happens and the partner is forced.
  sc.tiers = {{0.5, 1.0}, {1.0, 0.0}};
  sc.multiplier = 1.0;
  SwapOutcome outcome;
  Universe swapped = swap_households(u, sc, 3, &outcome);
  CHECK(outcome.selected == 1);
  CHECK(outcome.exchanged == 1);
  const auto& ra = swapped.blocks[0].households[0];
  const auto& rb = swapped.blocks[1].households[0];
  // The key (size, adults) stays put on both sides.
  CHECK(ra.size == 3);
  CHECK(rb.size == 3);
  CHECK(ra.children == 1);
  CHECK(rb.children == 1);
  // Everything else moved.
  CHECK(ra.race_flags == 2);
  CHECK(rb.race_flags == 1);
  CHECK_FALSE(ra.subsidized);
  CHECK(rb.subsidized);
  CHECK(ra.bedrooms == BedroomClass::kNone);
  CHECK(rb.bedrooms == BedroomClass::kLe1);
}

TEST_CASE("swapping preserves the state-level size and adults marginal") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 40;
  cfg.states = 2;
  cfg.super_households = 1500;
  Universe u = generate_universe(cfg, 61);
  SwapConfig sc;  // default ~10% target
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Universe swapped = swap_households(u, sc, seed);
    // Independent re-tabulation per state.
    std::map<std::tuple<int, int, int>, int64_t> before, after;
    for (const auto& b : u.blocks) {
      for (const auto& h : b.households) ++before[{b.state, h.size, h.adults()}];
    }
    for (const auto& b : swapped.blocks) {
      for (const auto& h : b.households) ++after[{b.state, h.size, h.adults()}];
    }
    CHECK(before == after);
    // Household count per block is untouched.
    for (size_t i = 0; i < u.blocks.size(); ++i) {
      CHECK(u.blocks[i].households.size() == swapped.blocks[i].households.size());
    }
  }
}

TEST_CASE("realized swap selection tracks the tier expectation") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 60;
  cfg.super_households = 1500;
  Universe u = generate_universe(cfg, 62);
  SwapConfig sc = SwapConfig::for_target_rate(0.10);
  int64_t selected = 0, exchanged = 0, households = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    SwapOutcome outcome;
    swap_households(u, sc, 100 + static_cast<uint64_t>(s), &outcome);
    selected += outcome.selected;
    exchanged += outcome.exchanged;
    households += outcome.households;
  }
  double p = sc.expected_rate();
  double mean = static_cast<double>(households) * p;
  double sigma = std::sqrt(static_cast<double>(households) * p * (1.0 - p));
  CHECK(std::abs(static_cast<double>(selected) - mean) <= 3.0 * sigma);
  // Partners are keyed on (size, adults); at this scale skips are rare.
  CHECK(static_cast<double>(selected - exchanged) <= 0.01 * static_cast<double>(selected));
}

TEST_CASE("budget allocation reproduces the documented shares") {
  StrategyCatalogue cat = StrategyCatalogue::production();
  CHECK(allocate_budget(cat, "HH_SIZE") == Rational(1, 5000) / Rational(3360));
  CHECK(allocate_budget(cat, "HH_RACEETH") == Rational(1, 5000) / Rational(2));
  CHECK(allocate_budget(cat, "CHILDREN") == Rational(1, 5000) / Rational(2));
  CHECK_THROWS_AS(allocate_budget(cat, "NO_SUCH_QUERY"), std::invalid_argument);
}

TEST_CASE("a single-cell strategy allocates its whole fraction") {
  StrategyCatalogue cat;
  StrategyQuery s;
  s.name = "ONECELL";
  s.fraction = Rational(3, 100);
  s.terms.push_back({"TOTAL", 1, {{"TARGET", 1}}});
  cat.strategies.push_back(s);
  CHECK(allocate_budget(cat, "TARGET") == Rational(3, 100));
}

TEST_CASE("budget variances follow 1/(c rho)") {
  PrivacyBudget b = PrivacyBudget::production_default({8, 7});
  CHECK(b.variance_for(size_query_id(3)) == Rational(168'000'000, 77));
  // Children ride on the person-table budget.
  CHECK(b.variance_for(kQueryChildren) == (Rational(1, 10000) * Rational(124, 25)).reciprocal());
  PrivacyBudget uni = PrivacyBudget::uniform(Rational(1, 10), {8, 7}, false);
  // 6 size bins + top bin + 8 race groups + children = 16 queries.
  CHECK(uni.allocations.size() == 16);
  CHECK(uni.variance_for(size_query_id(1)) == Rational(160, 1));
}

TEST_CASE("discrete gaussian concentrates as the variance vanishes") {
  Rng rng(8);
  Rational tiny(1, 1'000'000'000'000LL);
  for (int i = 0; i < 200; ++i) CHECK(discrete_gaussian(42, tiny, rng) == 42);
}

TEST_CASE("discrete gaussian mean and variance at unit scale") {
  Rng rng(9);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    int64_t v = discrete_gaussian_noise(Rational(1), rng);
    sum += static_cast<double>(v);
    sumsq += static_cast<double>(v) * static_cast<double>(v);
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) <= 0.02);
  double truth = oracle::dgauss_variance(1.0);
  CHECK(var >= 0.9 * truth);
  CHECK(var <= 1.1 * truth);
}

TEST_CASE("discrete gaussian survives goodness-of-fit at several scales") {
  const int n = 100000;
  for (auto [num, den] : {std::pair<int64_t, int64_t>{1, 2}, {1, 1}, {4, 1}}) {
    Rng rng(10 + static_cast<uint64_t>(num * 10 + den));
    std::vector<int64_t> samples(n);
    Rational sigma2(num, den);
    for (int i = 0; i < n; ++i) samples[i] = discrete_gaussian_noise(sigma2, rng);
    double p = oracle::dgauss_chi_square_pvalue(samples, static_cast<double>(num) / den);
    CHECK(p > 0.001);
  }
}

TEST_CASE("apportionment example") {
  BlockStatistics s;
  s.block_id = "s00b000000";
  s.n_total = 4;
  s.n_subsidized = 0;
  s.rows = {{size_query_id(1), 3, Sense::kEq},
            {size_query_id(2), -1, Sense::kEq},
            {size_query_id(3), 2, Sense::kEq}};
  BlockStatistics out = post_process(s, 4);
  // Clip to (3,0,2), scale to sum 4: quotas (2.4, 0, 1.6) -> (2,0,2) by
  // largest remainder.
  CHECK(out.answer(size_query_id(1)) == 2);
  CHECK(out.answer(size_query_id(2)) == 0);
  CHECK(out.answer(size_query_id(3)) == 2);
}

TEST_CASE("post-processing is a fixed point on consistent statistics") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 8;
  cfg.super_households = 1500;
  cfg.size_weights.assign(15, 0.0);
  // No households above the top size bin, so the rebuilt population equals
  // the true one.
  cfg.size_weights[0] = 0.3;
  cfg.size_weights[1] = 0.4;
  cfg.size_weights[2] = 0.3;
  Universe u = generate_universe(cfg, 70);
  auto qs = standard_workload({cfg.n_groups, cfg.hispanic_group});
  for (const auto& b : u.blocks) {
    BlockStatistics s = evaluate_block(b, qs);
    BlockStatistics p = post_process(s, s.n_total);
    for (const auto& row : s.rows) CHECK(p.answer(row.query_id) == row.answer);
  }
}

TEST_CASE("children are capped by the rebuilt population") {
  BlockStatistics s;
  s.block_id = "s00b000000";
  s.n_total = 10;
  s.n_subsidized = 0;
  s.rows = {{size_query_id(1), 10, Sense::kEq},
            {kQueryPopulation, 55, Sense::kGe},
            {kQueryChildren, 50, Sense::kGe}};
  BlockStatistics out = post_process(s, 10);
  CHECK(out.answer(kQueryPopulation) == 10);  // ten single-person households
  CHECK(out.answer(kQueryChildren) == 10);
}

TEST_CASE("a zero invariant zeroes the families") {
  BlockStatistics s;
  s.block_id = "s00b000000";
  s.n_total = 0;
  s.n_subsidized = 0;
  s.rows = {{size_query_id(1), 3, Sense::kEq}, {race_query_id(0), 2, Sense::kGe}};
  BlockStatistics out = post_process(s, 0);
  CHECK(out.answer(size_query_id(1)) == 0);
  CHECK(out.answer(race_query_id(0)) == 0);
}

TEST_CASE("noising with an enormous budget is the identity after repair") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 6;
  cfg.super_households = 1500;
  cfg.size_weights.assign(15, 0.0);
  cfg.size_weights[0] = 0.5;
  cfg.size_weights[3] = 0.5;
  Universe u = generate_universe(cfg, 71);
  auto qs = standard_workload({cfg.n_groups, cfg.hispanic_group});
  PrivacyBudget b = PrivacyBudget::production_default({cfg.n_groups, cfg.hispanic_group});
  b.rho_person = Rational(1'000'000'000'000LL);
  b.rho_household = Rational(1'000'000'000'000LL);
  for (const auto& block : u.blocks) {
    BlockStatistics s = evaluate_block(block, qs);
    Rng rng(5);
    BlockStatistics noised = apply_dp(s, b, rng);
    for (const auto& row : s.rows) CHECK(noised.answer(row.query_id) == row.answer);
    // The mechanism publishes the top size bin explicitly; with no large
    // households it is zero.
    CHECK(noised.answer(kQuerySize7Plus) == 0);
  }
}

TEST_CASE("post-processing invariants hold for noised blocks") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 40;
  cfg.super_households = 1500;
  Universe u = generate_universe(cfg, 72);
  auto qs = standard_workload({cfg.n_groups, cfg.hispanic_group});
  PrivacyBudget budget = PrivacyBudget::production_default({cfg.n_groups, cfg.hispanic_group});
  for (size_t i = 0; i < u.blocks.size(); ++i) {
    BlockStatistics s = evaluate_block(u.blocks[i], qs);
    Rng rng(derive_seed(99, "dp", i));
    BlockStatistics noised = apply_dp(s, budget, rng);
    int64_t size_sum = 0;
    for (int x = 1; x <= 6; ++x) size_sum += noised.answer(size_query_id(x));
    size_sum += noised.answer(kQuerySize7Plus);
    CHECK(size_sum == s.n_total);
    int64_t race_sum = 0;
    for (int g = 0; g < cfg.n_groups; ++g) race_sum += noised.answer(race_query_id(g));
    CHECK(race_sum == s.n_total);
    for (const auto& row : noised.rows) CHECK(row.answer >= 0);
    CHECK(noised.answer(kQueryChildren) <= noised.answer(kQueryPopulation));
    CHECK(noised.n_total == s.n_total);
    CHECK(noised.n_subsidized == s.n_subsidized);
  }
}

TEST_SUITE_END();

}  // namespace
