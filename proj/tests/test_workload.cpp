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

#include <set>
#include <sstream>

#include "blockrecon/model.hpp"
#include "blockrecon/workload.hpp"

namespace {

using namespace blockrecon;

HouseholdRecord rec(int size, uint32_t flags, int children, bool sub, BedroomClass bed) {
  HouseholdRecord h;
  h.size = size;
  h.race_flags = flags;
  h.children = children;
  h.subsidized = sub;
  h.bedrooms = bed;
  return h;
}

TEST_SUITE_BEGIN("workload");

TEST_CASE("catalogue size follows the race group count") {
  // Census side: six size bins, population, one count per group, children.
  // Subsidized side: residents, non-Hispanic groups, Hispanic householder,
  // households with children, three bedroom bins.
  auto qs7 = standard_workload({7, 6});
  int sf1 = 0, hud = 0;
  for (const auto& q : qs7) (q.id.rfind("sf1_", 0) == 0 ? sf1 : hud) += 1;
  CHECK(sf1 == 6 + 1 + 7 + 1);
  CHECK(hud == 1 + 6 + 1 + 1 + 3);

  auto qs8 = standard_workload({8, 7});
  CHECK(qs8.size() == 16 + 13);
}

TEST_CASE("catalogue ids are unique") {
  auto qs = standard_workload({8, 7});
  std::set<std::string> ids;
  for (const auto& q : qs) ids.insert(q.id);
  CHECK(ids.size() == qs.size());
}

TEST_CASE("empty block evaluates to zero everywhere") {
  Block block;
  block.id = "s00b000000";
  auto qs = standard_workload({8, 7});
  BlockStatistics s = evaluate_block(block, qs);
  CHECK(s.n_total == 0);
  CHECK(s.n_subsidized == 0);
  for (const auto& r : s.rows) CHECK(r.answer == 0);
}

TEST_CASE("direct counts on a simple block") {
  Block block;
  block.id = "s00b000001";
  for (int i = 0; i < 3; ++i) {
    block.households.push_back(rec(2, 1, 0, false, BedroomClass::kNone));
  }
  auto qs = standard_workload({8, 7});
  BlockStatistics s = evaluate_block(block, qs);
  CHECK(s.answer("sf1_size_2") == 3);
  CHECK(s.answer(kQueryPopulation) == 6);
  CHECK(s.answer("sf1_race_0") == 3);
  CHECK(s.answer(kQueryChildren) == 0);
  CHECK(s.answer(kQueryHudPopulation) == 0);
}

TEST_CASE("subsidized rows count only subsidized households") {
  Block block;
  block.id = "s00b000002";
  block.households.push_back(rec(5, 2, 1, true, BedroomClass::kLe1));
  block.households.push_back(rec(2, 1, 0, false, BedroomClass::kNone));
  auto qs = standard_workload({8, 7});
  BlockStatistics s = evaluate_block(block, qs);
  CHECK(s.answer(hud_bedrooms_query_id(BedroomClass::kLe1)) == 1);
  CHECK(s.answer(kQueryHudPopulation) == 5);
  CHECK(s.answer(kQueryHudChildren) == 1);
  CHECK(s.answer("hud_race_1") == 1);
  CHECK(s.answer("hud_race_0") == 0);
  CHECK(s.n_subsidized == 1);
}

TEST_CASE("answers match naive re-counting on random blocks") {
  RaceGroups groups{8, 7};
  auto qs = standard_workload(groups);
  Rng rng(77);
  ViolationRule rule;
  for (int trial = 0; trial < 50; ++trial) {
    Block block;
    block.id = "s00b000003";
    int n = 1 + static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i) {
      int size = 1 + static_cast<int>(rng.below(9));
      uint32_t flags = 1u + static_cast<uint32_t>(rng.below(255));
      int children = static_cast<int>(rng.below(static_cast<uint64_t>(size + 1)));
      bool sub = rng.below(2) == 1;
      BedroomClass bed = sub ? static_cast<BedroomClass>(rng.below(3)) : BedroomClass::kNone;
      block.households.push_back(rec(size, flags, children, sub, bed));
    }
    BlockStatistics s = evaluate_block(block, qs);
    s.validate();

    // Naive independent recount.
    for (const auto& q : qs) {
      int64_t expect = 0;
      for (const auto& h : block.households) {
        bool in_scope = q.scope == QueryScope::kAll || h.subsidized;
        if (!in_scope || !q.predicate(h)) continue;
        switch (q.weight) {
          case QueryWeight::kHouseholds: expect += 1; break;
          case QueryWeight::kPersons: expect += h.size; break;
          case QueryWeight::kChildren: expect += h.children; break;
        }
      }
      CHECK(s.answer(q.id) == expect);
    }

    // Structural invariants of the published numbers.
    int64_t size_bins = 0;
    bool any_large = false;
    int64_t sizes = 0, children = 0;
    for (const auto& h : block.households) {
      if (h.size <= 6) {
        ++size_bins;
      } else {
        any_large = true;
      }
      sizes += h.size;
      children += h.children;
    }
    int64_t reported = 0;
    for (int x = 1; x <= 6; ++x) reported += s.answer(size_query_id(x));
    CHECK(reported == size_bins);
    CHECK(reported <= s.n_total);
    if (!any_large) CHECK(reported == s.n_total);
    CHECK(s.answer(kQueryPopulation) == sizes);
    CHECK(s.answer(kQueryChildren) == children);
    CHECK(s.answer(kQueryHudPopulation) <= s.answer(kQueryPopulation));
    CHECK(s.answer(kQueryHudChildren) <= s.n_subsidized);
    (void)rule;
  }
}

TEST_CASE("evaluation is idempotent") {
  Block block;
  block.id = "s00b000004";
  block.households.push_back(rec(4, 3, 2, true, BedroomClass::kEq2));
  auto qs = standard_workload({8, 7});
  CHECK(evaluate_block(block, qs) == evaluate_block(block, qs));
}

TEST_CASE("statistics serialization round-trips") {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = 6;
  cfg.super_households = 1500;
  Universe u = generate_universe(cfg, 8);
  auto qs = standard_workload({cfg.n_groups, cfg.hispanic_group});
  std::vector<BlockStatistics> stats;
  for (const auto& b : u.blocks) stats.push_back(evaluate_block(b, qs));

  std::ostringstream out;
  std::vector<std::string> provenance = {"mechanism identity", "seed 8"};
  save_statistics(stats, out, provenance);
  std::istringstream in(out.str());
  auto back = load_statistics(in);
  REQUIRE(back.size() == stats.size());
  for (size_t i = 0; i < stats.size(); ++i) CHECK(back[i] == stats[i]);
}

TEST_SUITE_END();

}  // namespace
