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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "blockrecon/attack.hpp"
#include "blockrecon/workload.hpp"
#include "oracle.hpp"

namespace {

using namespace blockrecon;
namespace oracle = blockrecon::testing;

constexpr RaceGroups kSmallGroups{2, 1};

HouseholdRecord rec(int size, uint32_t flags, int children, bool sub, BedroomClass bed) {
  HouseholdRecord h;
  h.size = size;
  h.race_flags = flags;
  h.children = children;
  h.subsidized = sub;
  h.bedrooms = bed;
  return h;
}

Block block_of(std::vector<HouseholdRecord> households) {
  Block b;
  b.id = "s00b000000";
  b.state = 0;
  b.households = std::move(households);
  return b;
}

// Small-world setup: two race groups, sizes up to a cap, exhaustive race
// patterns, so the brute-force assignment oracle stays tractable.
struct SmallWorld {
  std::vector<CountingQuery> workload = standard_workload(kSmallGroups);
  ConfigurationSpace space;
  explicit SmallWorld(int size_cap = 5) {
    AttackSpaceOptions opts;
    opts.groups = kSmallGroups;
    opts.size_cap = size_cap;
    opts.patterns = AttackSpaceOptions::Patterns::kExhaustive;
    space = build_attack_space(opts);
  }
};

// Random small block over the small world.
Block random_block(Rng& rng, int max_households = 6, int max_size = 4) {
  Block b;
  b.id = "s00b000000";
  int n = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_households - 1)));
  int n_sub = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n)));
  for (int i = 0; i < n; ++i) {
    int size = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(max_size)));
    uint32_t flags = 1u + static_cast<uint32_t>(rng.below(3));
    int children = static_cast<int>(rng.below(static_cast<uint64_t>(size + 1)));
    bool sub = i < n_sub;
    BedroomClass bed = sub ? static_cast<BedroomClass>(rng.below(3)) : BedroomClass::kNone;
    b.households.push_back(rec(size, flags, children, sub, bed));
  }
  return b;
}

TEST_SUITE_BEGIN("attack");

TEST_CASE("attribute projections") {
  AttributeSet simpler = AttributeSet::simpler(0);
  HouseholdRecord h = rec(4, 0b11, 2, true, BedroomClass::kEq2);
  auto key = simpler.project(h);
  // size, child presence, bedrooms, headline flag
  REQUIRE(key.size() == 4);
  CHECK(key[0] == 4);
  CHECK(key[1] == 1);
  CHECK(key[2] == static_cast<int64_t>(BedroomClass::kEq2));
  CHECK(key[3] == 1);

  AttributeSet full = AttributeSet::full(kSmallGroups);
  CHECK(full.project(h).size() == 5);
}

TEST_CASE("space builders") {
  SUBCASE("saturated pattern space carries every group") {
    AttackSpaceOptions opts;
    opts.groups = {8, 7};
    opts.size_cap = 15;
    ConfigurationSpace space = build_attack_space(opts);
    for (size_t g = 0; g < space.size(); ++g) CHECK(space.at(g).race_flags == 0xffu);
    // sizes 1..15 with children 0..size, each in four subsidy/bedroom forms
    CHECK(space.size() == 4u * (15u * 16u / 2u + 15u));
  }
  SUBCASE("collapsed patterns saturate everything outside the mask") {
    AttackSpaceOptions opts;
    opts.groups = {3, 2};
    opts.size_cap = 2;
    opts.patterns = AttackSpaceOptions::Patterns::kCollapsed;
    opts.collapse_mask = 0b001;
    ConfigurationSpace space = build_attack_space(opts);
    std::set<uint32_t> patterns;
    for (size_t g = 0; g < space.size(); ++g) patterns.insert(space.at(g).race_flags);
    CHECK(patterns == std::set<uint32_t>{0b110, 0b111});
  }
  SUBCASE("support space expands the sample over the unobserved dimensions") {
    StateTables t;
    t.sample_count = 3;
    t.config_counts[SfKey{2, 1, 0}] = 2;
    t.config_counts[SfKey{4, 2, 1}] = 1;
    ConfigurationSpace space = build_support_space(t, 15);
    CHECK(space.size() == 8);  // two configurations x four subsidy/bedroom forms
    auto costs = mle_costs(space, t);
    for (size_t g = 0; g < space.size(); ++g) {
      double expect = space.at(g).size == 2 ? -std::log(2.0 / 3.0) : -std::log(1.0 / 3.0);
      CHECK(costs[g] == doctest::Approx(expect));
    }
  }
}

TEST_CASE("three households, one unit of each bedroom class: feasible") {
  SmallWorld w;
  Block b = block_of({rec(1, 1, 0, true, BedroomClass::kLe1), rec(3, 1, 0, true, BedroomClass::kEq2),
                      rec(3, 1, 0, true, BedroomClass::kGe3)});
  BlockStatistics s = evaluate_block(b, w.workload);
  auto det = detect_violation_block(s, w.space, w.workload);
  CHECK_FALSE(det.flagged);
  // Brute force agrees: some assignment satisfies the occupancy equations.
  auto assignments = oracle::enumerate_consistent(s, std::vector<HouseholdRecord>(
                                                         w.space.configs().begin(),
                                                         w.space.configs().end()),
                                                  kSmallGroups, true);
  CHECK_FALSE(assignments.empty());
}

TEST_CASE("two size-5 households with a single large unit: forced violation") {
  SmallWorld w;
  Block b = block_of({rec(5, 1, 0, true, BedroomClass::kLe1), rec(5, 1, 0, true, BedroomClass::kEq2),
                      rec(1, 1, 0, true, BedroomClass::kGe3)});
  BlockStatistics s = evaluate_block(b, w.workload);
  auto det = detect_violation_block(s, w.space, w.workload);
  CHECK(det.flagged);
  auto assignments = oracle::enumerate_consistent(s, std::vector<HouseholdRecord>(
                                                         w.space.configs().begin(),
                                                         w.space.configs().end()),
                                                  kSmallGroups, true);
  CHECK(assignments.empty());
}

TEST_CASE("single undersized unit is a trivial flag") {
  SmallWorld w;
  Block b = block_of({rec(5, 1, 0, true, BedroomClass::kLe1)});
  BlockStatistics s = evaluate_block(b, w.workload);
  CHECK(detect_violation_block(s, w.space, w.workload).flagged);
}

TEST_CASE("all-small households can never be flagged") {
  SmallWorld w;
  Block b = block_of({rec(2, 1, 0, true, BedroomClass::kLe1), rec(1, 2, 0, true, BedroomClass::kLe1),
                      rec(2, 1, 1, false, BedroomClass::kNone)});
  BlockStatistics s = evaluate_block(b, w.workload);
  CHECK_FALSE(detect_violation_block(s, w.space, w.workload).flagged);
}

TEST_CASE("ground truth is always feasible under exact statistics") {
  SmallWorld w;
  Rng rng(200);
  for (int trial = 0; trial < 30; ++trial) {
    Block b = random_block(rng);
    BlockStatistics s = evaluate_block(b, w.workload);
    CHECK(block_reconstructable(s, w.space, w.workload));
  }
}

TEST_CASE("detection matches the assignment oracle on random small blocks") {
  SmallWorld w;
  std::vector<HouseholdRecord> configs(w.space.configs().begin(), w.space.configs().end());
  Rng rng(201);
  int flagged = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Block b = random_block(rng, 6, 4);
    BlockStatistics s = evaluate_block(b, w.workload);
    auto det = detect_violation_block(s, w.space, w.workload);
    REQUIRE_FALSE(det.undetermined);
    auto ok = oracle::enumerate_consistent(s, configs, kSmallGroups, true);
    CHECK(det.flagged == ok.empty());
    flagged += det.flagged ? 1 : 0;
    // Detection soundness: a flag implies a true violation in the block.
    if (det.flagged) {
      ViolationRule rule;
      bool any = false;
      for (const auto& h : b.households) any |= rule.violates(h);
      CHECK(any);
    }
  }
  CHECK(flagged > 0);  // the battle covered both outcomes
}

TEST_CASE("occupancy constraints never enlarge the feasible set") {
  SmallWorld w;
  std::vector<HouseholdRecord> configs(w.space.configs().begin(), w.space.configs().end());
  Rng rng(202);
  for (int trial = 0; trial < 10; ++trial) {
    Block b = random_block(rng, 5, 4);
    BlockStatistics s = evaluate_block(b, w.workload);
    auto with = oracle::enumerate_consistent(s, configs, kSmallGroups, true);
    auto without = oracle::enumerate_consistent(s, configs, kSmallGroups, false);
    CHECK(with.size() <= without.size());
    std::set<std::vector<int64_t>> base(without.begin(), without.end());
    for (const auto& x : with) CHECK(base.contains(x));
  }
}

// A tiny hand-made prior whose support space keeps enumeration tractable.
StateTables tiny_prior() {
  StateTables t;
  t.sample_count = 10;
  t.config_counts[SfKey{1, 1, 0}] = 3;
  t.config_counts[SfKey{2, 1, 0}] = 3;
  t.config_counts[SfKey{2, 2, 1}] = 1;
  t.config_counts[SfKey{3, 2, 1}] = 2;
  t.config_counts[SfKey{5, 1, 2}] = 1;
  t.tail_fallback = {{7}, {1.0}};
  t.child_fallback = {{1}, {1.0}};
  t.bedroom_prior = {0.5, 0.3, 0.2};
  t.binary_priors = {0.5, 0.4, 0.3};
  return t;
}

TEST_CASE("likelihood reconstruction is the empirical argmin") {
  StateTables prior = tiny_prior();
  ConfigurationSpace support = build_support_space(prior, 15);
  std::vector<HouseholdRecord> configs(support.configs().begin(), support.configs().end());
  auto costs = mle_costs(support, prior);
  auto workload = standard_workload(kSmallGroups);
  Rng rng(203);
  int solved = 0;
  for (int trial = 0; trial < 40 && solved < 20; ++trial) {
    // Ground truth drawn from the support so the statistics are attainable.
    Block b;
    b.id = "s00b000000";
    int n = 2 + static_cast<int>(rng.below(4));
    int n_sub = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    for (int i = 0; i < n; ++i) {
      const HouseholdRecord& base = configs[rng.below(configs.size())];
      HouseholdRecord h = base;
      h.subsidized = i < n_sub;
      h.bedrooms = h.subsidized ? static_cast<BedroomClass>(rng.below(3)) : BedroomClass::kNone;
      b.households.push_back(h);
    }
    BlockStatistics s = evaluate_block(b, workload);
    Reconstruction r = reconstruct_mle(s, support, prior, workload);
    REQUIRE(r.status == SolveStatus::kOptimal);
    ++solved;

    auto all = oracle::enumerate_consistent(s, configs, kSmallGroups, false);
    REQUIRE_FALSE(all.empty());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : all) {
      double obj = 0.0;
      for (size_t g = 0; g < x.size(); ++g) obj += static_cast<double>(x[g]) * costs[g];
      best = std::min(best, obj);
    }
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
  }
  CHECK(solved >= 20);
}

TEST_CASE("likelihood choices follow the prior") {
  // One household, two candidate configurations with prior ratio 9:1.
  StateTables prior;
  prior.sample_count = 10;
  prior.config_counts[SfKey{2, 1, 0}] = 9;
  prior.config_counts[SfKey{2, 2, 0}] = 1;
  prior.tail_fallback = {{7}, {1.0}};
  prior.child_fallback = {{1}, {1.0}};
  prior.bedroom_prior = {0.5, 0.3, 0.2};
  prior.binary_priors = {0.5, 0.5, 0.5};
  ConfigurationSpace support = build_support_space(prior, 15);
  auto workload = standard_workload(kSmallGroups);

  // Race statistics are lower bounds, so a size-2 household with either flag
  // satisfies statistics that only pin the size; likelihood must pick the
  // common configuration.
  Block b = block_of({rec(2, 1, 0, false, BedroomClass::kNone)});
  BlockStatistics s = evaluate_block(b, workload);
  // Drop the race rows to leave both configurations admissible.
  std::erase_if(s.rows, [](const BlockStatistics::Row& r) {
    return r.query_id.rfind("sf1_race_", 0) == 0;
  });
  Reconstruction r = reconstruct_mle(s, support, prior, workload);
  REQUIRE(r.status == SolveStatus::kOptimal);
  size_t chosen = 0;
  for (size_t g = 0; g < r.counts.size(); ++g) {
    if (r.counts[g] == 1) chosen = g;
  }
  CHECK(support.at(chosen).race_flags == 1u);  // the 9/10 configuration
  CHECK(r.objective == doctest::Approx(-std::log(0.9)));
}

TEST_CASE("top-t reconstructions match the brute-force ranking") {
  StateTables prior = tiny_prior();
  ConfigurationSpace support = build_support_space(prior, 15);
  std::vector<HouseholdRecord> configs(support.configs().begin(), support.configs().end());
  auto costs = mle_costs(support, prior);
  auto workload = standard_workload(kSmallGroups);
  Rng rng(204);
  for (int trial = 0; trial < 8; ++trial) {
    Block b;
    b.id = "s00b000000";
    int n = 2 + static_cast<int>(rng.below(3));
    int n_sub = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    for (int i = 0; i < n; ++i) {
      HouseholdRecord h = configs[rng.below(configs.size())];
      h.subsidized = i < n_sub;
      h.bedrooms = h.subsidized ? static_cast<BedroomClass>(rng.below(3)) : BedroomClass::kNone;
      b.households.push_back(h);
    }
    BlockStatistics s = evaluate_block(b, workload);
    auto all = oracle::enumerate_consistent(s, configs, kSmallGroups, false);
    REQUIRE_FALSE(all.empty());
    std::vector<double> objs;
    for (const auto& x : all) {
      double o = 0.0;
      for (size_t g = 0; g < x.size(); ++g) o += static_cast<double>(x[g]) * costs[g];
      objs.push_back(o);
    }
    std::sort(objs.begin(), objs.end());

    const int t = std::min<int>(5, static_cast<int>(all.size()));
    ReconstructionSet rs = reconstruct_topt(s, support, prior, workload, t);
    REQUIRE(static_cast<int>(rs.items.size()) == t);
    for (int i = 0; i < t; ++i) {
      CHECK(rs.items[i].objective == doctest::Approx(objs[static_cast<size_t>(i)]).epsilon(1e-9));
    }
    // t = 1 coincides with the single-solution attack.
    Reconstruction one = reconstruct_mle(s, support, prior, workload);
    CHECK(one.objective == doctest::Approx(rs.items[0].objective).epsilon(1e-12));
    // Requesting more than exists returns exactly the feasible count.
    ReconstructionSet everything =
        reconstruct_topt(s, support, prior, workload, static_cast<int>(all.size()) + 3);
    CHECK(everything.items.size() == all.size());
  }
}

TEST_CASE("soft reconstruction") {
  StateTables prior = tiny_prior();
  ConfigurationSpace support = build_support_space(prior, 15);
  auto workload = standard_workload(kSmallGroups);
  Block b = block_of({rec(2, 1, 0, true, BedroomClass::kEq2), rec(3, 2, 1, false, BedroomClass::kNone)});
  BlockStatistics s = evaluate_block(b, workload);

  SUBCASE("noiseless statistics make the soft optimum the hard optimum") {
    Reconstruction hard = reconstruct_mle(s, support, prior, workload);
    Reconstruction soft = reconstruct_soft(s, support, &prior, 1.0, workload);
    REQUIRE(hard.status == SolveStatus::kOptimal);
    REQUIRE(soft.status == SolveStatus::kOptimal);
    CHECK(soft.objective == doctest::Approx(hard.objective).epsilon(1e-9));
    CHECK(soft.counts == hard.counts);
  }
  SUBCASE("a one-off perturbation costs exactly lambda") {
    BlockStatistics noisy = s;
    // One more child-household on the subsidized side than the truth allows.
    noisy.upsert(kQueryHudChildren, Sense::kEq).answer += 1;
    const double lambda = 1000.0;
    Reconstruction hard = reconstruct_mle(s, support, prior, workload);
    Reconstruction soft = reconstruct_soft(noisy, support, &prior, lambda, workload);
    REQUIRE(soft.status == SolveStatus::kOptimal);
    CHECK(soft.objective == doctest::Approx(hard.objective + lambda).epsilon(1e-9));
    CHECK(soft.counts == hard.counts);
  }
  SUBCASE("lambda zero without a prior accepts any cardinality-feasible answer") {
    Reconstruction soft = reconstruct_soft(s, support, nullptr, 0.0, workload);
    REQUIRE(soft.status == SolveStatus::kOptimal);
    CHECK(soft.objective == doctest::Approx(0.0));
    int64_t total = 0, sub = 0;
    for (size_t g = 0; g < soft.counts.size(); ++g) {
      total += soft.counts[g];
      if (support.at(g).subsidized) sub += soft.counts[g];
    }
    CHECK(total == s.n_total);
    CHECK(sub == s.n_subsidized);
  }
}

TEST_CASE("solution variability") {
  SmallWorld w(4);
  std::vector<HouseholdRecord> configs(w.space.configs().begin(), w.space.configs().end());
  AttributeSet full = AttributeSet::full(kSmallGroups);

  auto oracle_solvar = [&](const BlockStatistics& s, const std::vector<int64_t>& ref_counts,
                           const ConfigurationSpace& ref_space, const AttributeSet& attrs,
                           HouseholdSubset subset) {
    ViolationRule rule;
    auto in_subset = [&](const HouseholdRecord& h) {
      if (subset == HouseholdSubset::kSubsidized) return h.subsidized;
      if (subset == HouseholdSubset::kViolating) return rule.violates(h);
      return true;
    };
    auto hist_of = [&](const std::vector<int64_t>& counts,
                       const ConfigurationSpace& space) {
      std::map<std::vector<int64_t>, int64_t> h;
      for (size_t g = 0; g < counts.size(); ++g) {
        if (counts[g] > 0 && in_subset(space.at(g))) h[attrs.project(space.at(g))] += counts[g];
      }
      return h;
    };
    auto ref_hist = hist_of(ref_counts, ref_space);
    int64_t best = 0;
    for (const auto& x : oracle::enumerate_consistent(s, configs, kSmallGroups, false)) {
      auto h = hist_of(x, w.space);
      std::set<std::vector<int64_t>> cells;
      for (const auto& [k, v] : ref_hist) cells.insert(k);
      for (const auto& [k, v] : h) cells.insert(k);
      int64_t d = 0;
      for (const auto& c : cells) {
        int64_t a = ref_hist.contains(c) ? ref_hist.at(c) : 0;
        int64_t b2 = h.contains(c) ? h.at(c) : 0;
        d += std::llabs(a - b2);
      }
      best = std::max(best, d);
    }
    return best;
  };

  SUBCASE("a uniquely pinned block has zero variability") {
    Block b = block_of({rec(1, 1, 0, true, BedroomClass::kGe3)});
    BlockStatistics s = evaluate_block(b, w.workload);
    // The reference is the ground truth itself.
    std::vector<int64_t> counts(w.space.size(), 0);
    counts[w.space.find(b.households[0]).value()] = 1;
    Reconstruction ref;
    ref.block_id = b.id;
    ref.status = SolveStatus::kOptimal;
    ref.counts = counts;
    SolvarReport r = solution_variability(ref, w.space, s, w.space, w.workload, full,
                                          HouseholdSubset::kAll);
    CHECK(r.raw == oracle_solvar(s, counts, w.space, full, HouseholdSubset::kAll));
    CHECK(r.raw == 0);
    CHECK(r.normalized == doctest::Approx(0.0));
    CHECK(r.exact);
  }
  SUBCASE("random small blocks match the exhaustive maximum") {
    Rng rng(205);
    for (int trial = 0; trial < 8; ++trial) {
      Block b = random_block(rng, 4, 3);
      BlockStatistics s = evaluate_block(b, w.workload);
      std::vector<int64_t> counts(w.space.size(), 0);
      for (const auto& h : b.households) counts[w.space.find(h).value()] += 1;
      Reconstruction ref;
      ref.block_id = b.id;
      ref.status = SolveStatus::kOptimal;
      ref.counts = counts;
      for (HouseholdSubset subset :
           {HouseholdSubset::kAll, HouseholdSubset::kSubsidized, HouseholdSubset::kViolating}) {
        SolvarReport r =
            solution_variability(ref, w.space, s, w.space, w.workload, full, subset);
        CHECK(r.exact);
        CHECK(r.raw == oracle_solvar(s, counts, w.space, full, subset));
      }
      AttributeSet simpler = AttributeSet::simpler(0);
      SolvarReport r =
          solution_variability(ref, w.space, s, w.space, w.workload, simpler, HouseholdSubset::kAll);
      CHECK(r.exact);
      CHECK(r.raw == oracle_solvar(s, counts, w.space, simpler, HouseholdSubset::kAll));
      if (s.n_total > 0) {
        CHECK(r.normalized >= 0.0);
        CHECK(r.normalized <= 1.0);
      }
    }
  }
  SUBCASE("any two feasible references agree within a factor of two") {
    Rng rng(206);
    for (int trial = 0; trial < 5; ++trial) {
      Block b = random_block(rng, 4, 3);
      BlockStatistics s = evaluate_block(b, w.workload);
      auto all = oracle::enumerate_consistent(s, configs, kSmallGroups, false);
      if (all.size() < 2) continue;
      std::vector<int64_t> raws;
      for (size_t pick : {size_t{0}, all.size() / 2, all.size() - 1}) {
        Reconstruction ref;
        ref.block_id = b.id;
        ref.status = SolveStatus::kOptimal;
        ref.counts = all[pick];
        SolvarReport r = solution_variability(ref, w.space, s, w.space, w.workload, full,
                                              HouseholdSubset::kAll);
        REQUIRE(r.exact);
        raws.push_back(r.raw);
      }
      int64_t lo = *std::min_element(raws.begin(), raws.end());
      int64_t hi = *std::max_element(raws.begin(), raws.end());
      if (lo > 0) CHECK(hi <= 2 * lo);
    }
  }
}

TEST_SUITE_END();

}  // namespace
