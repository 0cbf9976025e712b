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

#include "blockrecon/attack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace blockrecon {

AttributeSet AttributeSet::full(const RaceGroups& groups) {
  AttributeSet a;
  a.size = true;
  a.children_count = true;
  a.subsidized = true;
  a.bedrooms = true;
  a.race_mask = (groups.count >= 32) ? ~0u : ((1u << groups.count) - 1u);
  a.label = "full";
  return a;
}

AttributeSet AttributeSet::simpler(int headline_group) {
  AttributeSet a;
  a.size = true;
  a.bedrooms = true;
  a.child_presence = true;
  a.race_mask = 1u << headline_group;
  a.label = "simpler";
  return a;
}

AttributeSet AttributeSet::hud_key(const RaceGroups& groups) {
  AttributeSet a;
  a.subsidized = true;
  a.bedrooms = true;
  a.child_presence = true;
  a.race_mask = (1u << groups.count) - 1u;
  a.label = "hud";
  return a;
}

AttributeSet AttributeSet::broker_key(const RaceGroups& groups) {
  AttributeSet a;
  a.child_presence = true;
  a.race_mask = (1u << groups.count) - 1u;
  a.label = "broker";
  return a;
}

AttributeSet AttributeSet::sf1_key(const RaceGroups& groups) {
  AttributeSet a;
  a.size = true;
  a.children_count = true;
  a.race_mask = (1u << groups.count) - 1u;
  a.label = "sf1";
  return a;
}

std::vector<int64_t> AttributeSet::project(const HouseholdRecord& h) const {
  std::vector<int64_t> key;
  key.reserve(6);
  if (size) key.push_back(h.size);
  if (children_count) key.push_back(h.children);
  if (child_presence) key.push_back(h.has_children() ? 1 : 0);
  if (subsidized) key.push_back(h.subsidized ? 1 : 0);
  if (bedrooms) key.push_back(static_cast<int64_t>(h.bedrooms));
  if (race_mask != 0) key.push_back(static_cast<int64_t>(h.race_flags & race_mask));
  return key;
}

namespace {

std::vector<uint32_t> pattern_list(const AttackSpaceOptions& options) {
  const uint32_t all = (1u << options.groups.count) - 1u;
  switch (options.patterns) {
    case AttackSpaceOptions::Patterns::kSaturated:
      return {all};
    case AttackSpaceOptions::Patterns::kExhaustive: {
      std::vector<uint32_t> out;
      for (uint32_t p = 1; p <= all; ++p) out.push_back(p);
      return out;
    }
    case AttackSpaceOptions::Patterns::kCollapsed: {
      // Subsets over the collapse mask, everything else saturated. The
      // saturated remainder keeps every race lower bound as satisfiable as
      // it would be over the exhaustive pattern set.
      uint32_t mask = options.collapse_mask & all;
      uint32_t rest = all & ~mask;
      std::vector<uint32_t> out;
      uint32_t sub = 0;
      for (;;) {
        uint32_t p = sub | rest;
        if (p != 0) out.push_back(p);
        if (sub == mask) break;
        sub = (sub - mask) & mask;  // next subset of mask
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
  }
  return {all};
}

}  // namespace

ConfigurationSpace build_attack_space(const AttackSpaceOptions& options) {
  std::vector<HouseholdRecord> configs;
  const auto patterns = pattern_list(options);
  for (int size = 1; size <= options.size_cap; ++size) {
    for (uint32_t flags : patterns) {
      for (int children = 0; children <= size; ++children) {
        HouseholdRecord base;
        base.size = size;
        base.race_flags = flags;
        base.children = children;
        base.subsidized = false;
        base.bedrooms = BedroomClass::kNone;
        configs.push_back(base);
        for (BedroomClass b : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
          HouseholdRecord sub = base;
          sub.subsidized = true;
          sub.bedrooms = b;
          configs.push_back(sub);
        }
      }
    }
  }
  return ConfigurationSpace(std::move(configs));
}

ConfigurationSpace build_support_space(const StateTables& prior, int size_cap) {
  std::vector<HouseholdRecord> configs;
  for (const auto& [key, count] : prior.config_counts) {
    if (count <= 0 || key.size > size_cap) continue;
    HouseholdRecord base;
    base.size = key.size;
    base.race_flags = key.race_flags;
    base.children = key.children;
    base.subsidized = false;
    base.bedrooms = BedroomClass::kNone;
    configs.push_back(base);
    for (BedroomClass b : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
      HouseholdRecord sub = base;
      sub.subsidized = true;
      sub.bedrooms = b;
      configs.push_back(sub);
    }
  }
  if (configs.empty()) {
    throw std::invalid_argument("build_support_space: the sample supports no configuration");
  }
  return ConfigurationSpace(std::move(configs));
}

std::vector<double> mle_costs(const ConfigurationSpace& space, const StateTables& prior) {
  std::vector<double> costs(space.size());
  for (size_t g = 0; g < space.size(); ++g) {
    double p = prior.census_prob(sf_key(space.at(g)));
    if (p <= 0.0) {
      throw std::invalid_argument("mle_costs: configuration outside the sample support");
    }
    costs[g] = -std::log(p);
  }
  return costs;
}

namespace {

// Largest possible total size of n_s households consistent with the
// published size distribution: residual households at the top admitted size,
// then the reported bins from the largest down.
int64_t max_subsidized_population(const BlockStatistics& stats, int max_size) {
  int64_t remaining = stats.n_subsidized;
  int64_t total = 0;
  int64_t reported = 0;
  std::array<int64_t, 6> bins = {0, 0, 0, 0, 0, 0};
  for (int x = 1; x <= 6; ++x) {
    if (const auto* row = stats.find(size_query_id(x))) {
      bins[x - 1] = row->answer;
      reported += row->answer;
    }
  }
  int64_t residual = std::max<int64_t>(0, stats.n_total - reported);
  int64_t take = std::min(residual, remaining);
  total += take * max_size;
  remaining -= take;
  for (int x = 6; x >= 1 && remaining > 0; --x) {
    take = std::min(bins[x - 1], remaining);
    total += take * x;
    remaining -= take;
  }
  return total;
}

}  // namespace

IntegerProgram build_block_program(const BlockStatistics& stats, const ConfigurationSpace& space,
                                   std::span<const CountingQuery> workload, bool forbid_violations,
                                   const ViolationRule& rule) {
  const size_t n = space.size();
  IntegerProgram ip;
  ip.upper.resize(n);
  for (size_t g = 0; g < n; ++g) {
    ip.upper[g] = space.at(g).subsidized ? stats.n_subsidized : stats.n_total - stats.n_subsidized;
  }

  LinearConstraint all_card;
  all_card.label = "households";
  all_card.sense = ConstraintSense::kEq;
  all_card.rhs = stats.n_total;
  LinearConstraint sub_card;
  sub_card.label = "subsidized_households";
  sub_card.sense = ConstraintSense::kEq;
  sub_card.rhs = stats.n_subsidized;
  for (size_t g = 0; g < n; ++g) {
    all_card.terms.emplace_back(static_cast<int32_t>(g), 1);
    if (space.at(g).subsidized) sub_card.terms.emplace_back(static_cast<int32_t>(g), 1);
  }
  ip.constraints.push_back(std::move(all_card));
  ip.constraints.push_back(std::move(sub_card));

  int max_size = 0;
  for (size_t g = 0; g < n; ++g) max_size = std::max(max_size, space.at(g).size);

  for (const auto& q : workload) {
    const auto* row = stats.find(q.id);
    if (row == nullptr) continue;  // published files may omit rows; absent means unconstrained

    LinearConstraint c;
    c.label = q.id;
    c.rhs = row->answer;
    bool is_size_bin = q.id.rfind("sf1_size_", 0) == 0;
    bool is_race = q.id.rfind("sf1_race_", 0) == 0 || q.id.rfind("hud_race_", 0) == 0 ||
                   q.id == kQueryHudHispanic;
    if (is_size_bin) {
      // Size bins relax to lower bounds: households beyond the reported
      // distribution may take any size.
      c.sense = ConstraintSense::kGe;
    } else {
      c.sense = row->sense == Sense::kEq ? ConstraintSense::kEq : ConstraintSense::kGe;
    }
    if (q.id == kQueryHudPopulation) {
      c.rhs = std::min(row->answer, max_subsidized_population(stats, max_size));
    }

    bool any_support = false;
    for (size_t g = 0; g < n; ++g) {
      int64_t a = q.contribution(space.at(g));
      if (a != 0) {
        c.terms.emplace_back(static_cast<int32_t>(g), a);
        any_support = true;
      }
    }
    if (!any_support && is_race && row->answer > 0) {
      throw std::invalid_argument("statistics reference race groups absent from the space: " +
                                  q.id);
    }
    if (c.terms.empty() && c.sense == ConstraintSense::kGe && c.rhs <= 0) continue;
    ip.constraints.push_back(std::move(c));
  }

  // Implied upper bounds from the mutually exclusive families; they do not
  // change the feasible set (each follows from the lower bounds plus the
  // cardinality), but they sharpen the relaxation and the bounds pass.
  {
    std::array<int64_t, 6> bins = {0, 0, 0, 0, 0, 0};
    int64_t reported = 0;
    bool have_bins = false;
    for (int x = 1; x <= 6; ++x) {
      if (const auto* row = stats.find(size_query_id(x))) {
        bins[x - 1] = row->answer;
        reported += row->answer;
        have_bins = true;
      }
    }
    if (have_bins) {
      int64_t residual = std::max<int64_t>(0, stats.n_total - reported);
      for (int x = 1; x <= 6; ++x) {
        if (stats.find(size_query_id(x)) == nullptr) continue;
        LinearConstraint cap;
        cap.label = "size_cap_" + std::to_string(x);
        cap.sense = ConstraintSense::kLe;
        cap.rhs = bins[x - 1] + residual;
        for (size_t g = 0; g < n; ++g) {
          if (space.at(g).size == x) cap.terms.emplace_back(static_cast<int32_t>(g), 1);
        }
        ip.constraints.push_back(std::move(cap));
      }
    }
    int64_t bed_total = 0;
    bool have_beds = true;
    std::array<int64_t, 3> beds = {0, 0, 0};
    for (BedroomClass bc : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
      const auto* row = stats.find(hud_bedrooms_query_id(bc));
      if (row == nullptr) {
        have_beds = false;
        break;
      }
      beds[static_cast<int>(bc)] = row->answer;
      bed_total += row->answer;
    }
    if (have_beds) {
      for (BedroomClass bc : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
        LinearConstraint cap;
        cap.label = std::string("bedroom_cap_") + bedroom_name(bc);
        cap.sense = ConstraintSense::kLe;
        cap.rhs = stats.n_subsidized - (bed_total - beds[static_cast<int>(bc)]);
        for (size_t g = 0; g < n; ++g) {
          if (space.at(g).subsidized && space.at(g).bedrooms == bc) {
            cap.terms.emplace_back(static_cast<int32_t>(g), 1);
          }
        }
        ip.constraints.push_back(std::move(cap));
      }
    }
  }

  if (forbid_violations) {
    // Zero units with more occupants than the class allows, one equation per
    // constrained class.
    LinearConstraint le1;
    le1.label = "occupancy_le1";
    le1.sense = ConstraintSense::kEq;
    le1.rhs = 0;
    LinearConstraint eq2;
    eq2.label = "occupancy_eq2";
    eq2.sense = ConstraintSense::kEq;
    eq2.rhs = 0;
    for (size_t g = 0; g < n; ++g) {
      const auto& cfg = space.at(g);
      if (!cfg.subsidized) continue;
      if (cfg.bedrooms == BedroomClass::kLe1 && cfg.size > rule.le1_max) {
        le1.terms.emplace_back(static_cast<int32_t>(g), 1);
      }
      if (cfg.bedrooms == BedroomClass::kEq2 && cfg.size > rule.eq2_max) {
        eq2.terms.emplace_back(static_cast<int32_t>(g), 1);
      }
    }
    if (!le1.terms.empty()) ip.constraints.push_back(std::move(le1));
    if (!eq2.terms.empty()) ip.constraints.push_back(std::move(eq2));
  }
  return ip;
}

DetectionResult detect_violation_block(const BlockStatistics& stats, const ConfigurationSpace& space,
                                       std::span<const CountingQuery> workload,
                                       const ViolationRule& rule, const SolveLimits& limits) {
  IntegerProgram ip = build_block_program(stats, space, workload, /*forbid_violations=*/true, rule);
  Solution s = solve(ip, limits);
  DetectionResult r;
  r.nodes = s.nodes;
  r.flagged = s.status == SolveStatus::kInfeasible;
  r.undetermined = s.status == SolveStatus::kBoundReached;
  return r;
}

bool block_reconstructable(const BlockStatistics& stats, const ConfigurationSpace& space,
                           std::span<const CountingQuery> workload, const SolveLimits& limits) {
  IntegerProgram ip = build_block_program(stats, space, workload, /*forbid_violations=*/false);
  Solution s = solve(ip, limits);
  return s.status == SolveStatus::kFeasible || s.status == SolveStatus::kOptimal;
}

namespace {

Reconstruction to_reconstruction(const BlockStatistics& stats, const ConfigurationSpace& space,
                                 const ViolationRule& rule, const Solution& s) {
  Reconstruction r;
  r.block_id = stats.block_id;
  r.status = s.status;
  r.nodes = s.nodes;
  r.objective = s.objective;
  if (s.counts.empty()) return r;
  r.counts.assign(s.counts.begin(), s.counts.begin() + static_cast<ptrdiff_t>(space.size()));
  for (size_t g = 0; g < space.size(); ++g) {
    if (r.counts[g] > 0 && rule.violates(space.at(g))) {
      r.violating.emplace_back(g, r.counts[g]);
    }
  }
  return r;
}

}  // namespace

Reconstruction reconstruct_mle(const BlockStatistics& stats, const ConfigurationSpace& space,
                               const StateTables& prior, std::span<const CountingQuery> workload,
                               const ViolationRule& rule, const SolveLimits& limits) {
  IntegerProgram ip = build_block_program(stats, space, workload, /*forbid_violations=*/false);
  ip.objective = mle_costs(space, prior);
  Solution s = solve(ip, limits);
  return to_reconstruction(stats, space, rule, s);
}

ReconstructionSet reconstruct_topt(const BlockStatistics& stats, const ConfigurationSpace& space,
                                   const StateTables& prior, std::span<const CountingQuery> workload,
                                   int t, const ViolationRule& rule, const SolveLimits& limits) {
  IntegerProgram ip = build_block_program(stats, space, workload, /*forbid_violations=*/false);
  ip.objective = mle_costs(space, prior);
  TopSolutions top = enumerate_top(ip, t, limits);
  ReconstructionSet out;
  out.truncated = top.truncated;
  out.nodes = top.nodes;
  out.items.reserve(top.solutions.size());
  for (const auto& s : top.solutions) out.items.push_back(to_reconstruction(stats, space, rule, s));
  return out;
}

namespace {

IntegerProgram build_soft_program(const BlockStatistics& stats, const ConfigurationSpace& space,
                                  const StateTables* prior, double lambda,
                                  std::span<const CountingQuery> workload) {
  if (lambda < 0.0) throw std::invalid_argument("reconstruct_soft: lambda must be >= 0");
  const size_t n = space.size();
  IntegerProgram hard =
      build_block_program(stats, space, workload, /*forbid_violations=*/false);

  // Tight activity bound: distribute the subsidized and unsubsidized
  // cardinalities over the largest coefficients of each side.
  auto activity_bound = [&](const LinearConstraint& c) {
    int64_t max_sub = 0, max_unsub = 0;
    for (const auto& [j, a] : c.terms) {
      if (a <= 0) continue;
      if (space.at(static_cast<size_t>(j)).subsidized) {
        max_sub = std::max(max_sub, a);
      } else {
        max_unsub = std::max(max_unsub, a);
      }
    }
    return max_sub * stats.n_subsidized + max_unsub * (stats.n_total - stats.n_subsidized);
  };

  IntegerProgram ip;
  ip.upper = hard.upper;
  ip.objective = prior != nullptr ? mle_costs(space, *prior) : std::vector<double>(n, 0.0);

  for (auto& c : hard.constraints) {
    if (c.label == "households" || c.label == "subsidized_households") {
      ip.constraints.push_back(std::move(c));  // cardinalities stay hard
      continue;
    }
    // Sense violation becomes a staircase of unit deviation steps with
    // marginal cost lambda * (2k - 1); their sum prices the squared
    // deviation exactly at integer points, and convexity makes the
    // relaxation fill the cheap steps first.
    int64_t over_cap = c.sense == ConstraintSense::kGe
                           ? 0
                           : std::max<int64_t>(0, activity_bound(c) - c.rhs);
    int64_t under_cap = std::max<int64_t>(0, c.rhs);
    auto add_steps = [&](int64_t steps, int sign) {
      int32_t prev = -1;
      for (int64_t k = 1; k <= steps; ++k) {
        int32_t var = static_cast<int32_t>(ip.upper.size());
        ip.upper.push_back(1);
        ip.objective.push_back(lambda * static_cast<double>(2 * k - 1));
        c.terms.emplace_back(var, sign);
        if (prev >= 0) {
          // Steps fill in order; anything else is the same deviation at a
          // higher price. Propagation-only: the relaxation gains nothing
          // from these rows.
          LinearConstraint order;
          order.label = "step_order";
          order.sense = ConstraintSense::kGe;
          order.rhs = 0;
          order.terms.emplace_back(prev, 1);
          order.terms.emplace_back(var, -1);
          order.lp_skip = true;
          ip.constraints.push_back(std::move(order));
        }
        prev = var;
      }
    };
    // Shortfall steps raise the activity; overshoot steps lower it. A lower
    // bound only pays for shortfall.
    add_steps(under_cap, +1);
    if (c.sense == ConstraintSense::kEq) {
      add_steps(over_cap, -1);
    } else {
      c.sense = ConstraintSense::kGe;
    }
    ip.constraints.push_back(std::move(c));
  }
  ip.exclusion_arity = n;
  return ip;
}

}  // namespace

Reconstruction reconstruct_soft(const BlockStatistics& stats, const ConfigurationSpace& space,
                                const StateTables* prior, double lambda,
                                std::span<const CountingQuery> workload, const ViolationRule& rule,
                                const SolveLimits& limits) {
  IntegerProgram ip = build_soft_program(stats, space, prior, lambda, workload);
  Solution s = solve(ip, limits);
  // Trim the deviation variables before interpreting counts.
  if (!s.counts.empty()) s.counts.resize(space.size());
  return to_reconstruction(stats, space, rule, s);
}

ReconstructionSet reconstruct_soft_topt(const BlockStatistics& stats,
                                        const ConfigurationSpace& space, const StateTables* prior,
                                        double lambda, std::span<const CountingQuery> workload,
                                        int t, const ViolationRule& rule,
                                        const SolveLimits& limits) {
  // Unlike the hard enumeration, a truncated solve does not end the list:
  // its incumbent is excluded and the search continues, so the list is
  // best-effort rather than provably rank-ordered.
  IntegerProgram ip = build_soft_program(stats, space, prior, lambda, workload);
  ReconstructionSet out;
  for (int k = 0; k < t; ++k) {
    Solution s = solve(ip, limits);
    out.nodes += s.nodes;
    if (s.status == SolveStatus::kInfeasible) break;
    if (s.counts.empty()) {  // budget ran out before any incumbent
      out.truncated = true;
      break;
    }
    if (s.status != SolveStatus::kOptimal) out.truncated = true;
    ip.exclusions.emplace_back(s.counts.begin(),
                               s.counts.begin() + static_cast<ptrdiff_t>(space.size()));
    s.counts.resize(space.size());
    out.items.push_back(to_reconstruction(stats, space, rule, s));
  }
  return out;
}

SolvarReport solution_variability(const Reconstruction& reference,
                                  const ConfigurationSpace& reference_space,
                                  const BlockStatistics& stats, const ConfigurationSpace& space,
                                  std::span<const CountingQuery> workload, const AttributeSet& attrs,
                                  HouseholdSubset subset, const ViolationRule& rule,
                                  const SolveLimits& limits) {
  auto in_subset = [&](const HouseholdRecord& h) {
    switch (subset) {
      case HouseholdSubset::kSubsidized: return h.subsidized;
      case HouseholdSubset::kViolating: return rule.violates(h);
      default: return true;
    }
  };

  // Shared cell index across the solver space and the reference space: a
  // reference cell the solver space cannot reach still contributes to the
  // distance.
  std::map<std::vector<int64_t>, int32_t> cells;
  auto cell_index = [&](const HouseholdRecord& h) {
    auto key = attrs.project(h);
    auto [it, inserted] = cells.emplace(std::move(key), static_cast<int32_t>(cells.size()));
    return it->second;
  };

  L1Objective obj;
  obj.cell_of.assign(space.size(), -1);
  for (size_t g = 0; g < space.size(); ++g) {
    if (in_subset(space.at(g))) obj.cell_of[g] = cell_index(space.at(g));
  }
  std::vector<int64_t> ref_hist(cells.size(), 0);
  int64_t ref_mass = 0;
  for (size_t g = 0; g < reference_space.size(); ++g) {
    if (g >= reference.counts.size() || reference.counts[g] == 0) continue;
    if (!in_subset(reference_space.at(g))) continue;
    int32_t c = cell_index(reference_space.at(g));
    if (static_cast<size_t>(c) >= ref_hist.size()) ref_hist.resize(cells.size(), 0);
    ref_hist[c] += reference.counts[g];
    ref_mass += reference.counts[g];
  }
  ref_hist.resize(cells.size(), 0);
  obj.reference = ref_hist;
  // The all-households and subsidized histograms carry a fixed total mass
  // (the cardinality constraints pin it); the violating histogram does not.
  if (subset == HouseholdSubset::kAll) {
    obj.conserved_mass = stats.n_total;
  } else if (subset == HouseholdSubset::kSubsidized) {
    obj.conserved_mass = stats.n_subsidized;
  }

  IntegerProgram ip = build_block_program(stats, space, workload, /*forbid_violations=*/false);
  L1Result res = maximize_l1(ip, obj, limits);

  SolvarReport report;
  report.raw = res.value;
  report.attrs_label = attrs.label;
  report.subset = subset;
  report.exact = res.exact;
  switch (subset) {
    case HouseholdSubset::kAll: report.denominator = stats.n_total; break;
    case HouseholdSubset::kSubsidized: report.denominator = stats.n_subsidized; break;
    default: report.denominator = ref_mass; break;
  }
  report.normalized = report.denominator > 0
                          ? static_cast<double>(report.raw) / (2.0 * static_cast<double>(report.denominator))
                          : (report.raw == 0 ? 0.0 : std::nan(""));
  return report;
}

}  // namespace blockrecon
