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

#include <sstream>

#include "blockrecon/reident.hpp"

namespace {

using namespace blockrecon;

constexpr RaceGroups kGroups{2, 1};

HouseholdRecord rec(int size, uint32_t flags, int children, bool sub, BedroomClass bed) {
  HouseholdRecord h;
  h.size = size;
  h.race_flags = flags;
  h.children = children;
  h.subsidized = sub;
  h.bedrooms = bed;
  return h;
}

// A two-block universe with one known violator.
Universe tiny_universe() {
  Universe u;
  u.n_groups = kGroups.count;
  u.hispanic_group = kGroups.hispanic;
  Block a;
  a.id = "s00b000000";
  a.state = 0;
  a.households = {rec(5, 1, 2, true, BedroomClass::kLe1),   // violator
                  rec(2, 2, 0, true, BedroomClass::kEq2),
                  rec(3, 1, 1, false, BedroomClass::kNone)};
  Block b;
  b.id = "s00b000001";
  b.state = 0;
  b.households = {rec(2, 1, 0, true, BedroomClass::kLe1),
                  rec(4, 2, 2, true, BedroomClass::kGe3)};
  u.blocks = {a, b};
  return u;
}

ConfigurationSpace space_of(const Universe& u) {
  std::vector<HouseholdRecord> configs;
  for (const auto& b : u.blocks) {
    for (const auto& h : b.households) configs.push_back(h);
  }
  std::sort(configs.begin(), configs.end());
  configs.erase(std::unique(configs.begin(), configs.end()), configs.end());
  return ConfigurationSpace(configs);
}

Reconstruction recon_of(const Universe& u, const ConfigurationSpace& space, size_t block) {
  Reconstruction r;
  r.block_id = u.blocks[block].id;
  r.status = SolveStatus::kOptimal;
  r.counts.assign(space.size(), 0);
  ViolationRule rule;
  for (const auto& h : u.blocks[block].households) {
    size_t g = space.find(h).value();
    r.counts[g] += 1;
  }
  for (size_t g = 0; g < space.size(); ++g) {
    if (r.counts[g] > 0 && rule.violates(space.at(g))) r.violating.emplace_back(g, r.counts[g]);
  }
  return r;
}

TEST_SUITE_BEGIN("reident");

TEST_CASE("ranking from reconstructions") {
  Universe u = tiny_universe();
  ConfigurationSpace space = space_of(u);
  AttributeSet attrs = AttributeSet::hud_key(kGroups);

  SUBCASE("a single reconstruction ranks its violator") {
    Reconstruction r = recon_of(u, space, 0);
    RankedCandidates rc = rank_from_reconstructions(std::span(&r, 1), space, attrs);
    REQUIRE(rc.entries.size() == 1);
    CHECK(rc.entries[0].score == 1);
    CHECK(rc.entries[0].key == attrs.project(u.blocks[0].households[0]));
  }
  SUBCASE("frequency across reconstructions orders candidates") {
    Reconstruction r1 = recon_of(u, space, 0);
    Reconstruction r2 = r1;
    // A second reconstruction where a different configuration violates too.
    HouseholdRecord other = rec(6, 2, 0, true, BedroomClass::kEq2);
    std::vector<HouseholdRecord> configs(space.configs().begin(), space.configs().end());
    configs.push_back(other);
    ConfigurationSpace wide{configs};
    auto remap = [&](const Reconstruction& r) {
      Reconstruction out = r;
      out.counts.assign(wide.size(), 0);
      for (size_t g = 0; g < space.size(); ++g) {
        if (r.counts[g] > 0) out.counts[wide.find(space.at(g)).value()] = r.counts[g];
      }
      out.violating.clear();
      ViolationRule rule;
      for (size_t g = 0; g < wide.size(); ++g) {
        if (out.counts[g] > 0 && rule.violates(wide.at(g))) out.violating.emplace_back(g, out.counts[g]);
      }
      return out;
    };
    Reconstruction w1 = remap(r1);
    Reconstruction w2 = remap(r2);
    w2.counts[wide.find(other).value()] = 1;
    w2.violating.emplace_back(wide.find(other).value(), 1);
    std::vector<Reconstruction> rs = {w1, w2};
    RankedCandidates rc = rank_from_reconstructions(rs, wide, attrs);
    REQUIRE(rc.entries.size() == 2);
    CHECK(rc.entries[0].score == 2);  // the violator common to both
    CHECK(rc.entries[1].score == 1);
    CHECK(rc.entries[0].key == attrs.project(u.blocks[0].households[0]));
  }
  SUBCASE("no violators means an empty ranking") {
    Reconstruction r = recon_of(u, space, 1);
    RankedCandidates rc = rank_from_reconstructions(std::span(&r, 1), space, attrs);
    CHECK(rc.entries.empty());
  }
  SUBCASE("reconstructions from different blocks are rejected") {
    std::vector<Reconstruction> rs = {recon_of(u, space, 0), recon_of(u, space, 1)};
    CHECK_THROWS_AS(rank_from_reconstructions(rs, space, attrs), std::invalid_argument);
  }
}

TEST_CASE("sampling baseline ranks by violating frequency") {
  StateTables t;
  HouseholdRecord a = rec(5, 1, 0, true, BedroomClass::kLe1);
  HouseholdRecord b = rec(6, 2, 1, true, BedroomClass::kEq2);
  t.violating_counts[a] = 5;
  t.violating_counts[b] = 2;
  AttributeSet attrs = AttributeSet::hud_key(kGroups);
  RankedCandidates rc = sampling_baseline(t, attrs);
  REQUIRE(rc.entries.size() == 2);
  CHECK(rc.provenance == RankedCandidates::Provenance::kSamplingBaseline);
  CHECK(rc.entries[0].key == attrs.project(a));
  CHECK(rc.entries[0].score == 5);
  CHECK(rc.entries[1].score == 2);

  StateTables empty;
  CHECK(sampling_baseline(empty, attrs).entries.empty());
}

TEST_CASE("putative violations join the key against the top ranks") {
  Universe u = tiny_universe();
  ConfigurationSpace space = space_of(u);
  AttributeSet attrs = AttributeSet::hud_key(kGroups);
  MatchKey key = MatchKey::build(u, attrs, /*subsidized_only=*/true);
  CHECK(key.records.size() == 4);  // subsidized households only

  Reconstruction r = recon_of(u, space, 0);
  RankedCandidates rc = rank_from_reconstructions(std::span(&r, 1), space, attrs);
  std::vector<int32_t> flagged = {0};

  SUBCASE("rank-1 match in a flagged block is included") {
    auto ids = putative_violations(rc, key, 1, flagged, false);
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == HouseholdRef{0, 0});
  }
  SUBCASE("k beyond the ranking joins against all of it") {
    auto a = putative_violations(rc, key, 1, flagged, false);
    auto b = putative_violations(rc, key, 500, flagged, false);
    CHECK(a == b);
  }
  SUBCASE("unflagged blocks contribute nothing") {
    std::vector<int32_t> none;
    CHECK(putative_violations(rc, key, 5, none, false).empty());
  }
  SUBCASE("duplicate projections drop out under the uniques restriction") {
    // Clone the violator inside the same block.
    Universe twin = u;
    twin.blocks[0].households.push_back(twin.blocks[0].households[0]);
    MatchKey twin_key = MatchKey::build(twin, attrs, true);
    auto all = putative_violations(rc, twin_key, 3, flagged, false);
    CHECK(all.size() == 2);  // both copies join
    auto uniq = putative_violations(rc, twin_key, 3, flagged, true);
    CHECK(uniq.empty());  // neither is unique in its block
  }
}

TEST_CASE("scores follow the set arithmetic") {
  RankedCandidates ranking;
  ranking.entries = {{{1}, 5}, {{2}, 3}, {{3}, 1}};
  MatchKey key;
  key.records = {{HouseholdRef{0, 0}, {1}},
                 {HouseholdRef{0, 1}, {2}},
                 {HouseholdRef{0, 2}, {3}},
                 {HouseholdRef{0, 3}, {4}}};

  SUBCASE("perfect answers") {
    std::vector<HouseholdRef> truth = {{0, 0}, {0, 1}};
    std::vector<HouseholdRef> vhat = truth;
    ScoreResult r = score(vhat, truth, ranking, 2, key);
    CHECK(r.precision.value() == doctest::Approx(1.0));
    CHECK(r.recall.value() == doctest::Approx(1.0));
    CHECK(r.match_rate.value() == doctest::Approx(1.0));
  }
  SUBCASE("disjoint answers") {
    std::vector<HouseholdRef> truth = {{0, 0}};
    std::vector<HouseholdRef> vhat = {{0, 3}};
    ScoreResult r = score(vhat, truth, ranking, 1, key);
    CHECK(r.precision.value() == doctest::Approx(0.0));
    CHECK(r.recall.value() == doctest::Approx(0.0));
  }
  SUBCASE("two of three putative, half of the truth") {
    std::vector<HouseholdRef> truth = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    std::vector<HouseholdRef> vhat = {{0, 0}, {0, 1}, {0, 3}};
    ScoreResult r = score(vhat, truth, ranking, 3, key);
    CHECK(r.precision.value() == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall.value() == doctest::Approx(0.5));
  }
  SUBCASE("empty sets surface as nulls") {
    std::vector<HouseholdRef> truth = {{0, 0}};
    ScoreResult r = score({}, truth, ranking, 1, key);
    CHECK_FALSE(r.precision.has_value());
    CHECK(r.recall.value() == doctest::Approx(0.0));
    ScoreResult r2 = score({}, {}, ranking, 1, key);
    CHECK_FALSE(r2.recall.has_value());
  }
  SUBCASE("match rate counts ranked configurations that hit a violator") {
    std::vector<HouseholdRef> truth = {{0, 0}, {0, 2}};  // keys {1} and {3}
    ScoreResult r = score({}, truth, ranking, 3, key);
    // Ranked keys {1},{2},{3}: two of three match violators.
    CHECK(r.match_rate.value() == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("block metrics") {
  Universe u = tiny_universe();  // one violating block (index 0)

  SUBCASE("exact flags") {
    std::vector<int32_t> flagged = {0};
    BlockMetrics m = block_metrics(flagged, u);
    CHECK(m.precision.value() == doctest::Approx(1.0));
    CHECK(m.recall.value() == doctest::Approx(1.0));
  }
  SUBCASE("arithmetic on partial flags") {
    Universe big;
    big.n_groups = 2;
    big.hispanic_group = 1;
    for (int i = 0; i < 6; ++i) {
      Block b;
      b.id = "s00b00000" + std::to_string(i);
      b.state = 0;
      bool violating = i < 4;
      b.households = {rec(5, 1, 0, true, violating ? BedroomClass::kLe1 : BedroomClass::kGe3)};
      big.blocks.push_back(b);
    }
    // Flag three blocks, two of them truly violating.
    std::vector<int32_t> flagged = {0, 1, 5};
    BlockMetrics m = block_metrics(flagged, big);
    CHECK(m.true_violating == 4);
    CHECK(m.precision.value() == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall.value() == doctest::Approx(0.5));
  }
}

TEST_CASE("putative sets grow with k and recall never drops") {
  Universe u = tiny_universe();
  ConfigurationSpace space = space_of(u);
  AttributeSet attrs = AttributeSet::broker_key(kGroups);
  MatchKey key = MatchKey::build(u, attrs, false);
  RankedCandidates ranking;
  ranking.entries = {{attrs.project(u.blocks[0].households[0]), 4},
                     {attrs.project(u.blocks[0].households[1]), 2},
                     {attrs.project(u.blocks[1].households[1]), 1}};
  std::vector<int32_t> flagged = {0, 1};
  std::vector<HouseholdRef> truth = true_violations(u);
  std::set<HouseholdRef> prev;
  std::optional<double> prev_recall;
  for (int k = 1; k <= 4; ++k) {
    auto ids = putative_violations(ranking, key, k, flagged, false);
    std::set<HouseholdRef> cur(ids.begin(), ids.end());
    for (const auto& id : prev) CHECK(cur.contains(id));
    auto uniq = putative_violations(ranking, key, k, flagged, true);
    std::set<HouseholdRef> uniq_set(uniq.begin(), uniq.end());
    for (const auto& id : uniq_set) CHECK(cur.contains(id));
    ScoreResult r = score(ids, truth, ranking, k, key);
    if (prev_recall.has_value() && r.recall.has_value()) CHECK(*r.recall >= *prev_recall);
    prev_recall = r.recall;
    prev = cur;
  }
}

TEST_CASE("attack reports serialize and reload") {
  AttackReport rep;
  rep.scenario = "identity";
  rep.true_violating_blocks = 4;
  rep.flagged_blocks = 3;
  rep.flagged_true = 3;
  rep.block_precision = 1.0;
  rep.block_recall = 0.75;
  rep.true_violating_households = 5;
  Curve c;
  c.key_label = "hud";
  c.uniques_only = false;
  CurvePoint p0;
  p0.k = 1;
  p0.v_hat = 2;
  p0.true_positives = 1;
  p0.precision = 0.5;
  p0.recall = 0.2;
  p0.match_rate = 1.0;
  CurvePoint p1;
  p1.k = 2;
  p1.v_hat = 0;  // null precision point
  c.points = {p0, p1};
  rep.curves.push_back(c);
  rep.solvar_normalized["simpler"] = {0.0, 0.25, 1.0};
  rep.violation_scatter = {{2, 1}, {0, 3}};

  std::ostringstream out;
  rep.save_metrics(out);
  std::istringstream in(out.str());
  AttackReport back = AttackReport::load_metrics(in);
  CHECK(back.scenario == rep.scenario);
  CHECK(back.flagged_blocks == rep.flagged_blocks);
  CHECK(back.block_precision.value() == doctest::Approx(1.0));
  REQUIRE(back.curves.size() == 1);
  REQUIRE(back.curves[0].points.size() == 2);
  CHECK(back.curves[0].points[0].precision.value() == doctest::Approx(0.5));
  CHECK_FALSE(back.curves[0].points[1].precision.has_value());
  CHECK(back.solvar_normalized.at("simpler") == rep.solvar_normalized.at("simpler"));
  CHECK(back.violation_scatter == rep.violation_scatter);

  std::ostringstream out2;
  back.save_metrics(out2);
  CHECK(out.str() == out2.str());
}

TEST_SUITE_END();

}  // namespace
