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

#include "blockrecon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blockrecon/parallel.hpp"
#include "blockrecon/textio.hpp"

namespace blockrecon {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

int state_from_block_id(const std::string& id) {
  if (id.size() < 2 || id[0] != 's') {
    throw std::runtime_error("block id does not carry a state code: " + id);
  }
  size_t b = id.find('b');
  if (b == std::string::npos) {
    throw std::runtime_error("block id does not carry a state code: " + id);
  }
  return static_cast<int>(parse_i64(std::string_view(id).substr(1, b - 1)));
}

Rational rational_field(const json& j, const char* name, const Rational& fallback) {
  if (!j.contains(name)) return fallback;
  const auto& v = j.at(name);
  if (v.is_string()) return Rational::parse(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<int64_t>());
  throw ConfigError(std::string("config: field '") + name +
                    "' must be an exact decimal string, e.g. \"4.96\"");
}

}  // namespace

const char* mechanism_name(MechanismKind k) {
  switch (k) {
    case MechanismKind::kIdentity: return "identity";
    case MechanismKind::kSwap: return "swap";
    default: return "dp";
  }
}

// --- Config ------------------------------------------------------------------

void ScenarioConfig::validate() const {
  if (schema_version != 1) throw ConfigError("config: unsupported schema_version");
  try {
    generation.validate();
    swap.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (attack.t < 1 || attack.t_floor < 1 || attack.t_floor > attack.t) {
    throw ConfigError("config: need 1 <= t_floor <= t");
  }
  if (attack.soft_t < 1 || attack.soft_max_nodes < 1) {
    throw ConfigError("config: soft_t and soft_max_nodes must be >= 1");
  }
  if (attack.lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
  if (attack.max_nodes < 1) throw ConfigError("config: max_nodes must be >= 1");
  for (const auto& a : attack.solvar_attrs) {
    if (a != "simpler" && a != "full") {
      throw ConfigError("config: solvar_attrs entries must be 'simpler' or 'full'");
    }
  }
  for (const auto& s : attack.solvar_subsets) {
    if (s != "all" && s != "subsidized" && s != "violating") {
      throw ConfigError("config: solvar_subsets entries must be all/subsidized/violating");
    }
  }
  for (const auto& k : evaluation.match_keys) {
    if (k != "hud" && k != "broker" && k != "sf1") {
      throw ConfigError("config: match_keys entries must be hud/broker/sf1");
    }
  }
  if (evaluation.k_max < 1) throw ConfigError("config: k_max must be >= 1");
  if (!(evaluation.baseline_fraction > 0.0 && evaluation.baseline_fraction <= 1.0)) {
    throw ConfigError("config: baseline_fraction must lie in (0, 1]");
  }
  if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ScenarioConfig c;
  try {
    c.schema_version = j.value("schema_version", 1);
    c.seed = j.value("seed", uint64_t{1});
    c.output_dir = j.value("output_dir", std::string("out"));
    c.parallelism = j.value("parallelism", 1);

    if (j.contains("generation")) {
      const auto& g = j.at("generation");
      GenerationConfig& gc = c.generation;
      GenerationConfig defaults = GenerationConfig::defaults();
      gc = defaults;
      gc.blocks = g.value("blocks", gc.blocks);
      gc.states = g.value("states", gc.states);
      gc.households_min = g.value("households_min", gc.households_min);
      gc.households_max = g.value("households_max", gc.households_max);
      gc.ns_floor = g.value("ns_floor", gc.ns_floor);
      gc.enforce_ns_floor = g.value("enforce_ns_floor", gc.enforce_ns_floor);
      gc.alpha = g.value("alpha", gc.alpha);
      gc.n_groups = g.value("n_groups", gc.n_groups);
      gc.hispanic_group = g.value("hispanic_group", gc.hispanic_group);
      gc.size_cap = g.value("size_cap", gc.size_cap);
      if (g.contains("size_weights")) gc.size_weights = g.at("size_weights").get<std::vector<double>>();
      if (g.contains("group_weights")) {
        gc.group_weights = g.at("group_weights").get<std::vector<double>>();
      }
      if (g.contains("child_presence")) {
        gc.child_presence = g.at("child_presence").get<std::vector<double>>();
      }
      gc.child_count_decay = g.value("child_count_decay", gc.child_count_decay);
      if (g.contains("bedroom_prior")) {
        auto v = g.at("bedroom_prior").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("config: bedroom_prior needs 3 entries");
        gc.bedroom_prior = {v[0], v[1], v[2]};
      }
      gc.super_households = g.value("super_households", gc.super_households);
      gc.sample_fraction = g.value("sample_fraction", gc.sample_fraction);
      gc.hud_response_rate = g.value("hud_response_rate", gc.hud_response_rate);
      // Defaults sized for the default caps; re-derive when the caps moved
      // and the user did not pin the tables.
      if (!g.contains("size_weights") && gc.size_cap != defaults.size_cap) {
        throw ConfigError("config: custom size_cap needs explicit size_weights");
      }
      if (!g.contains("group_weights") && gc.n_groups != defaults.n_groups) {
        throw ConfigError("config: custom n_groups needs explicit group_weights");
      }
      if (!g.contains("child_presence") && gc.size_cap != defaults.size_cap) {
        throw ConfigError("config: custom size_cap needs explicit child_presence");
      }
    }

    if (j.contains("mechanism")) {
      std::string m = j.at("mechanism").get<std::string>();
      if (m == "identity") {
        c.mechanism = MechanismKind::kIdentity;
      } else if (m == "swap") {
        c.mechanism = MechanismKind::kSwap;
      } else if (m == "dp") {
        c.mechanism = MechanismKind::kDp;
      } else {
        throw ConfigError("config: mechanism must be identity/swap/dp");
      }
    }

    if (j.contains("swap")) {
      const auto& s = j.at("swap");
      if (s.contains("tiers")) {
        c.swap.tiers.clear();
        for (const auto& t : s.at("tiers")) {
          c.swap.tiers.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
        }
      }
      if (s.contains("multiplier")) {
        c.swap.multiplier = s.at("multiplier").get<double>();
      } else if (s.contains("target_rate")) {
        c.swap.multiplier = s.at("target_rate").get<double>() / c.swap.tier_mass();
      }
      c.swap.candidate_pool = s.value("candidate_pool", c.swap.candidate_pool);
    }

    if (j.contains("dp")) {
      const auto& d = j.at("dp");
      if (d.contains("allocation")) {
        std::string a = d.at("allocation").get<std::string>();
        if (a == "das") {
          c.dp.das_allocation = true;
        } else if (a == "uniform") {
          c.dp.das_allocation = false;
        } else {
          throw ConfigError("config: dp.allocation must be das/uniform");
        }
      }
      c.dp.rho_person = rational_field(d, "rho_person", c.dp.rho_person);
      c.dp.rho_household = rational_field(d, "rho_household", c.dp.rho_household);
      c.dp.uniform_rho = rational_field(d, "uniform_rho", c.dp.uniform_rho);
      c.dp.noise_hud = d.value("noise_hud", c.dp.noise_hud);
    }

    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      c.attack.t = a.value("t", c.attack.t);
      c.attack.t_floor = a.value("t_floor", c.attack.t_floor);
      c.attack.lambda = a.value("lambda", c.attack.lambda);
      c.attack.max_nodes = a.value("max_nodes", c.attack.max_nodes);
      c.attack.topt_node_budget = a.value("topt_node_budget", c.attack.topt_node_budget);
      c.attack.soft_t = a.value("soft_t", c.attack.soft_t);
      c.attack.soft_max_nodes = a.value("soft_max_nodes", c.attack.soft_max_nodes);
      c.attack.compute_solvar = a.value("compute_solvar", c.attack.compute_solvar);
      if (a.contains("solvar_attrs")) {
        c.attack.solvar_attrs = a.at("solvar_attrs").get<std::vector<std::string>>();
      }
      if (a.contains("solvar_subsets")) {
        c.attack.solvar_subsets = a.at("solvar_subsets").get<std::vector<std::string>>();
      }
    }

    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      if (e.contains("match_keys")) {
        c.evaluation.match_keys = e.at("match_keys").get<std::vector<std::string>>();
      }
      c.evaluation.k_max = e.value("k_max", c.evaluation.k_max);
      c.evaluation.uniques_variants = e.value("uniques_variants", c.evaluation.uniques_variants);
      c.evaluation.baseline_fraction = e.value("baseline_fraction", c.evaluation.baseline_fraction);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ScenarioConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["parallelism"] = parallelism;
  const GenerationConfig& g = generation;
  j["generation"] = {{"blocks", g.blocks},
                     {"states", g.states},
                     {"households_min", g.households_min},
                     {"households_max", g.households_max},
                     {"ns_floor", g.ns_floor},
                     {"enforce_ns_floor", g.enforce_ns_floor},
                     {"alpha", g.alpha},
                     {"n_groups", g.n_groups},
                     {"hispanic_group", g.hispanic_group},
                     {"size_cap", g.size_cap},
                     {"size_weights", g.size_weights},
                     {"group_weights", g.group_weights},
                     {"child_presence", g.child_presence},
                     {"child_count_decay", g.child_count_decay},
                     {"bedroom_prior", g.bedroom_prior},
                     {"super_households", g.super_households},
                     {"sample_fraction", g.sample_fraction},
                     {"hud_response_rate", g.hud_response_rate}};
  j["mechanism"] = mechanism_name(mechanism);
  json tiers = json::array();
  for (const auto& t : swap.tiers) tiers.push_back({t.cum_fraction, t.probability});
  j["swap"] = {{"tiers", tiers},
               {"multiplier", swap.multiplier},
               {"candidate_pool", swap.candidate_pool}};
  j["dp"] = {{"allocation", dp.das_allocation ? "das" : "uniform"},
             {"rho_person", dp.rho_person.str()},
             {"rho_household", dp.rho_household.str()},
             {"uniform_rho", dp.uniform_rho.str()},
             {"noise_hud", dp.noise_hud}};
  j["attack"] = {{"t", attack.t},
                 {"t_floor", attack.t_floor},
                 {"lambda", attack.lambda},
                 {"max_nodes", attack.max_nodes},
                 {"topt_node_budget", attack.topt_node_budget},
                 {"soft_t", attack.soft_t},
                 {"soft_max_nodes", attack.soft_max_nodes},
                 {"compute_solvar", attack.compute_solvar},
                 {"solvar_attrs", attack.solvar_attrs},
                 {"solvar_subsets", attack.solvar_subsets}};
  j["evaluation"] = {{"match_keys", evaluation.match_keys},
                     {"k_max", evaluation.k_max},
                     {"uniques_variants", evaluation.uniques_variants},
                     {"baseline_fraction", evaluation.baseline_fraction}};
  return j.dump(2);
}

// --- Stages ---------------------------------------------------------------

Universe stage_generate(const ScenarioConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  Universe u = generate_universe(config.generation, config.seed, config.parallelism);
  {
    auto out = open_out(dir + "/universe.txt");
    save_universe(u, out);
  }
  {
    auto out = open_out(dir + "/empirical.txt");
    u.empirical_reference.save(out);
  }
  {
    auto out = open_out(dir + "/genlog.txt");
    u.log.save(out);
  }
  return u;
}

namespace {

PrivacyBudget build_budget(const DpConfig& dp, const RaceGroups& groups) {
  if (!dp.das_allocation) {
    return PrivacyBudget::uniform(dp.uniform_rho, groups, dp.noise_hud);
  }
  PrivacyBudget b = PrivacyBudget::production_default(groups);
  b.rho_person = dp.rho_person;
  b.rho_household = dp.rho_household;
  if (dp.noise_hud) {
    // Subsidized-side variant: the household budget spread evenly over the
    // subsidized-side statistics.
    std::vector<std::string> ids;
    ids.push_back(kQueryHudPopulation);
    for (int g = 0; g < groups.count; ++g) {
      if (g != groups.hispanic) ids.push_back(hud_race_query_id(g));
    }
    ids.push_back(kQueryHudHispanic);
    ids.push_back(kQueryHudChildren);
    for (BedroomClass bc : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
      ids.push_back(hud_bedrooms_query_id(bc));
    }
    Rational share(1, static_cast<int64_t>(ids.size()));
    for (const auto& id : ids) {
      b.allocations[id] = {share, BudgetTable::kHousehold};
    }
  }
  return b;
}

}  // namespace

std::vector<BlockStatistics> stage_publish(const ScenarioConfig& config, const Universe& universe,
                                           MechanismKind mechanism, const std::string& dir) {
  std::filesystem::create_directories(dir);
  RaceGroups groups = config.groups();
  std::vector<CountingQuery> workload = standard_workload(groups);

  const Universe* source = &universe;
  Universe swapped;
  SwapOutcome swap_outcome;
  if (mechanism == MechanismKind::kSwap) {
    swapped = swap_households(universe, config.swap, config.seed, &swap_outcome);
    source = &swapped;
    auto out = open_out(dir + "/universe_swap.txt");
    save_universe(swapped, out);
  }

  std::vector<BlockStatistics> stats(source->blocks.size());
  if (mechanism == MechanismKind::kDp) {
    PrivacyBudget budget = build_budget(config.dp, groups);
    parallel_for(source->blocks.size(), config.parallelism, [&](size_t b) {
      BlockStatistics exact = evaluate_block(source->blocks[b], workload);
      Rng rng(derive_seed(config.seed, "dp", b));
      stats[b] = apply_dp(exact, budget, rng);
    });
  } else {
    parallel_for(source->blocks.size(), config.parallelism, [&](size_t b) {
      stats[b] = evaluate_block(source->blocks[b], workload);
    });
  }

  std::vector<std::string> provenance;
  provenance.push_back(std::string("mechanism ") + mechanism_name(mechanism));
  provenance.push_back("seed " + std::to_string(config.seed));
  if (mechanism == MechanismKind::kDp) {
    provenance.push_back("rho_person " + config.dp.rho_person.str() + " rho_household " +
                         config.dp.rho_household.str() + " allocation " +
                         (config.dp.das_allocation ? "das" : "uniform"));
  }
  if (mechanism == MechanismKind::kSwap) {
    provenance.push_back("swap_multiplier " + format_double(config.swap.multiplier) +
                         " swap_exchanged " + std::to_string(swap_outcome.exchanged));
  }
  auto out = open_out(dir + "/stats_" + std::string(mechanism_name(mechanism)) + ".txt");
  save_statistics(stats, out, provenance);
  return stats;
}

AttackStageResult stage_attack(const ScenarioConfig& config,
                               const std::vector<BlockStatistics>& stats,
                               const EmpiricalDistribution& reference, MechanismKind mechanism,
                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  RaceGroups groups = config.groups();
  std::vector<CountingQuery> workload = standard_workload(groups);
  ViolationRule rule;
  SolveLimits limits;
  limits.max_nodes = config.attack.max_nodes;

  AttackSpaceOptions detect_opts;
  detect_opts.groups = groups;
  detect_opts.size_cap = config.generation.size_cap;
  detect_opts.patterns = AttackSpaceOptions::Patterns::kSaturated;
  ConfigurationSpace detect_space = build_attack_space(detect_opts);

  AttackStageResult result;
  for (const auto& [state, tables] : reference.states) {
    result.support_spaces.emplace(state, build_support_space(tables, config.generation.size_cap));
  }

  // Solution-variability spaces per attribute preset (shared across blocks).
  struct SolvarSpec {
    AttributeSet attrs;
    ConfigurationSpace space;
  };
  std::vector<SolvarSpec> solvar_specs;
  if (config.attack.compute_solvar) {
    for (const auto& label : config.attack.solvar_attrs) {
      AttributeSet attrs = label == "full" ? AttributeSet::full(groups) : AttributeSet::simpler(0);
      AttackSpaceOptions opts = detect_opts;
      opts.patterns = AttackSpaceOptions::Patterns::kCollapsed;
      opts.collapse_mask = attrs.race_mask;
      solvar_specs.push_back({attrs, build_attack_space(opts)});
    }
  }

  result.blocks.assign(stats.size(), {});
  parallel_for(stats.size(), config.parallelism, [&](size_t b) {
    const BlockStatistics& s = stats[b];
    BlockAttackResult& out = result.blocks[b];
    out.block_id = s.block_id;
    out.state = state_from_block_id(s.block_id);

    DetectionResult det = detect_violation_block(s, detect_space, workload, rule, limits);
    out.flagged = det.flagged;
    out.undetermined = det.undetermined;
    if (!out.flagged) {
      out.reconstructable = !det.undetermined ? true : block_reconstructable(s, detect_space, workload, limits);
      return;
    }
    out.reconstructable = block_reconstructable(s, detect_space, workload, limits);

    const ConfigurationSpace& support = result.support_spaces.at(out.state);
    const StateTables& prior = reference.for_state(out.state);

    SolveLimits topt_limits = limits;
    topt_limits.max_total_nodes = config.attack.topt_node_budget;
    ReconstructionSet recons;
    bool mle_usable = true;
    try {
      recons = reconstruct_topt(s, support, prior, workload, config.attack.t, rule, topt_limits);
    } catch (const std::invalid_argument&) {
      mle_usable = false;  // statistics mention race groups outside the sample support
    }
    if (mle_usable && recons.truncated &&
        static_cast<int>(recons.items.size()) < config.attack.t_floor) {
      // The budget cut the list below the floor: one bounded retry for the
      // floor count with a larger allowance.
      SolveLimits floor_limits = limits;
      floor_limits.max_total_nodes = config.attack.topt_node_budget * 4;
      recons = reconstruct_topt(s, support, prior, workload, config.attack.t_floor, rule,
                                floor_limits);
    }
    bool used_soft = false;
    if (!mle_usable || recons.items.empty()) {
      // Soft path: noisy statistics (or a support gap) make the hard program
      // infeasible; minimize likelihood plus squared query error instead.
      // Bound proofs are out of reach here, so solves run to a node budget
      // and keep their incumbents.
      used_soft = true;
      const StateTables* prior_ptr = mle_usable ? &prior : nullptr;
      SolveLimits soft_limits;
      soft_limits.max_nodes = config.attack.soft_max_nodes;
      soft_limits.arithmetic = Arithmetic::kFloat;
      ReconstructionSet soft = reconstruct_soft_topt(s, support, prior_ptr, config.attack.lambda,
                                                     workload, config.attack.soft_t, rule,
                                                     soft_limits);
      recons = std::move(soft);
    }
    out.truncated = recons.truncated;
    out.reconstructions = std::move(recons.items);
    if (!out.reconstructions.empty()) {
      int64_t putative = 0;
      for (const auto& [g, c] : out.reconstructions.front().violating) putative += c;
      out.putative_violating = putative;
    }

    for (const auto& spec : solvar_specs) {
      // Solution variability ranges over the reconstructions consistent with
      // the statistics; it needs a feasible reference from the hard path.
      if (used_soft || out.reconstructions.empty() || !out.reconstructable) break;
      if (out.reconstructions.front().counts.empty()) break;
      for (const auto& subset_label : config.attack.solvar_subsets) {
        HouseholdSubset subset = HouseholdSubset::kAll;
        if (subset_label == "subsidized") subset = HouseholdSubset::kSubsidized;
        if (subset_label == "violating") subset = HouseholdSubset::kViolating;
        out.solvar.push_back(solution_variability(out.reconstructions.front(), support, s,
                                                  spec.space, workload, spec.attrs, subset, rule,
                                                  limits));
      }
    }
  });

  const std::string tag = mechanism_name(mechanism);
  {
    auto out = open_out(dir + "/detect_" + tag + ".txt");
    out << "# blockrecon detection v1\n";
    out << "# block_id flagged undetermined reconstructable\n";
    for (const auto& b : result.blocks) {
      out << b.block_id << ' ' << (b.flagged ? 1 : 0) << ' ' << (b.undetermined ? 1 : 0) << ' '
          << (b.reconstructable ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open_out(dir + "/recon_" + tag + ".txt");
    out << "# blockrecon reconstructions v1\n";
    out << "# block_id rank size race_mask children subsidized bedroom count violating\n";
    char mask[16];
    for (const auto& b : result.blocks) {
      const ConfigurationSpace* space =
          b.reconstructions.empty() ? nullptr : &result.support_spaces.at(b.state);
      for (size_t r = 0; r < b.reconstructions.size(); ++r) {
        const Reconstruction& rec = b.reconstructions[r];
        for (size_t g = 0; g < rec.counts.size(); ++g) {
          if (rec.counts[g] == 0) continue;
          const HouseholdRecord& cfg = space->at(g);
          std::snprintf(mask, sizeof(mask), "%x", cfg.race_flags);
          ViolationRule vrule;
          out << b.block_id << ' ' << r << ' ' << cfg.size << ' ' << mask << ' ' << cfg.children
              << ' ' << (cfg.subsidized ? 1 : 0) << ' ' << static_cast<int>(cfg.bedrooms) << ' '
              << rec.counts[g] << ' ' << (vrule.violates(cfg) ? 1 : 0) << '\n';
        }
      }
    }
  }
  {
    auto out = open_out(dir + "/solvar_" + tag + ".txt");
    out << "# blockrecon solvar v1\n";
    out << "# block_id attrs subset raw normalized exact\n";
    for (const auto& b : result.blocks) {
      for (const auto& sv : b.solvar) {
        out << b.block_id << ' ' << sv.attrs_label << ' ' << subset_name(sv.subset) << ' '
            << sv.raw << ' ' << format_double(sv.normalized) << ' ' << (sv.exact ? 1 : 0) << '\n';
      }
    }
  }
  return result;
}

AttackReport stage_evaluate(const ScenarioConfig& config, const Universe& truth,
                            const AttackStageResult& attack, MechanismKind mechanism,
                            const std::string& dir) {
  std::filesystem::create_directories(dir);
  RaceGroups groups = config.groups();
  ViolationRule rule;

  AttackReport report;
  report.scenario = mechanism_name(mechanism);

  std::vector<int32_t> flagged;
  std::map<std::string, int32_t> id_to_index;
  for (size_t b = 0; b < truth.blocks.size(); ++b) {
    id_to_index[truth.blocks[b].id] = static_cast<int32_t>(b);
  }
  for (const auto& b : attack.blocks) {
    auto it = id_to_index.find(b.block_id);
    if (it == id_to_index.end()) {
      throw std::runtime_error("attack results reference unknown block " + b.block_id);
    }
    if (b.flagged) flagged.push_back(it->second);
    if (b.undetermined) ++report.undetermined_blocks;
    if (!b.reconstructable) ++report.unreconstructable_blocks;
  }
  std::sort(flagged.begin(), flagged.end());

  BlockMetrics bm = block_metrics(flagged, truth, rule);
  report.true_violating_blocks = bm.true_violating;
  report.flagged_blocks = bm.flagged;
  report.flagged_true = bm.flagged_true;
  report.block_precision = bm.precision;
  report.block_recall = bm.recall;

  std::vector<HouseholdRef> truth_v = true_violations(truth, rule);
  report.true_violating_households = static_cast<int64_t>(truth_v.size());

  // Scatter: true vs putative violating counts per flagged block.
  for (const auto& b : attack.blocks) {
    if (!b.flagged) continue;
    int32_t idx = id_to_index.at(b.block_id);
    int64_t true_count = 0;
    for (const auto& h : truth.blocks[static_cast<size_t>(idx)].households) {
      if (rule.violates(h)) ++true_count;
    }
    report.violation_scatter.emplace_back(true_count, b.putative_violating);
  }

  // Solution variability values, grouped by attribute label.
  for (const auto& b : attack.blocks) {
    for (const auto& sv : b.solvar) {
      if (sv.subset == HouseholdSubset::kAll && !std::isnan(sv.normalized)) {
        report.solvar_normalized[sv.attrs_label].push_back(sv.normalized);
      }
    }
  }

  // Per-flagged-block rankings from the reconstructions.
  struct BlockRanking {
    int32_t block;
    int state;
    RankedCandidates ranking;
  };

  // The sampling baseline: violating-configuration frequencies from a
  // ground-truth sample, one ranking per state.
  EmpiricalDistribution baseline_sample = sample_ground_truth(
      truth, config.evaluation.baseline_fraction, derive_seed(config.seed, "baseline"), rule);

  for (const auto& key_label : config.evaluation.match_keys) {
    AttributeSet attrs;
    bool subsidized_only = false;
    if (key_label == "hud") {
      attrs = AttributeSet::hud_key(groups);
      subsidized_only = true;
    } else if (key_label == "broker") {
      attrs = AttributeSet::broker_key(groups);
    } else {
      attrs = AttributeSet::sf1_key(groups);
    }
    MatchKey key = MatchKey::build(truth, attrs, subsidized_only);

    std::vector<BlockRanking> rankings;
    for (const auto& b : attack.blocks) {
      if (!b.flagged || b.reconstructions.empty()) continue;
      const ConfigurationSpace& space = attack.support_spaces.at(b.state);
      RankedCandidates r = rank_from_reconstructions(b.reconstructions, space, attrs, rule);
      if (r.entries.empty()) continue;
      rankings.push_back({id_to_index.at(b.block_id), b.state, std::move(r)});
    }

    std::map<int, RankedCandidates> baseline_rankings;
    for (const auto& [state, tables] : baseline_sample.states) {
      RankedCandidates r = sampling_baseline(tables, attrs);
      if (!r.entries.empty()) baseline_rankings.emplace(state, std::move(r));
    }

    std::vector<bool> unique_flags = {false};
    if (config.evaluation.uniques_variants) unique_flags.push_back(true);

    for (bool uniq : unique_flags) {
      Curve recon_curve{key_label, uniq, {}};
      Curve base_curve{key_label + "_baseline", uniq, {}};
      for (int k = 1; k <= config.evaluation.k_max; ++k) {
        // Reconstruction attack: per-block rankings, union of putative sets.
        std::set<HouseholdRef> vhat;
        double match_rate_sum = 0.0;
        int64_t match_rate_n = 0;
        for (const auto& br : rankings) {
          std::vector<int32_t> one_block = {br.block};
          auto ids = putative_violations(br.ranking, key, k, one_block, uniq);
          vhat.insert(ids.begin(), ids.end());
          ScoreResult sr = score(ids, truth_v, br.ranking, k, key);
          if (sr.match_rate.has_value()) {
            match_rate_sum += *sr.match_rate;
            ++match_rate_n;
          }
        }
        std::vector<HouseholdRef> vhat_list(vhat.begin(), vhat.end());
        CurvePoint p;
        p.k = k;
        p.v_hat = static_cast<int64_t>(vhat_list.size());
        std::set<HouseholdRef> truth_set(truth_v.begin(), truth_v.end());
        for (const auto& id : vhat_list) {
          if (truth_set.contains(id)) ++p.true_positives;
        }
        if (!vhat_list.empty()) {
          p.precision = static_cast<double>(p.true_positives) / static_cast<double>(vhat_list.size());
        }
        if (!truth_v.empty()) {
          p.recall = static_cast<double>(p.true_positives) / static_cast<double>(truth_v.size());
        }
        if (match_rate_n > 0) p.match_rate = match_rate_sum / static_cast<double>(match_rate_n);
        recon_curve.points.push_back(p);

        // Baseline: one state-level ranking applied to all flagged blocks.
        std::set<HouseholdRef> base_vhat;
        double base_mr_sum = 0.0;
        int64_t base_mr_n = 0;
        for (const auto& [state, ranking] : baseline_rankings) {
          std::vector<int32_t> state_flagged;
          for (int32_t fb : flagged) {
            if (truth.blocks[static_cast<size_t>(fb)].state == state) state_flagged.push_back(fb);
          }
          if (state_flagged.empty()) continue;
          auto ids = putative_violations(ranking, key, k, state_flagged, uniq);
          base_vhat.insert(ids.begin(), ids.end());
          ScoreResult sr = score(ids, truth_v, ranking, k, key);
          if (sr.match_rate.has_value()) {
            base_mr_sum += *sr.match_rate;
            ++base_mr_n;
          }
        }
        CurvePoint bp;
        bp.k = k;
        bp.v_hat = static_cast<int64_t>(base_vhat.size());
        for (const auto& id : base_vhat) {
          if (truth_set.contains(id)) ++bp.true_positives;
        }
        if (!base_vhat.empty()) {
          bp.precision = static_cast<double>(bp.true_positives) / static_cast<double>(base_vhat.size());
        }
        if (!truth_v.empty()) {
          bp.recall = static_cast<double>(bp.true_positives) / static_cast<double>(truth_v.size());
        }
        if (base_mr_n > 0) bp.match_rate = base_mr_sum / static_cast<double>(base_mr_n);
        base_curve.points.push_back(bp);
      }
      report.curves.push_back(std::move(recon_curve));
      report.curves.push_back(std::move(base_curve));
    }
  }

  auto out = open_out(dir + "/metrics_" + std::string(mechanism_name(mechanism)) + ".txt");
  report.save_metrics(out);
  return report;
}

AttackStageResult load_attack_results(const ScenarioConfig& config, const std::string& dir,
                                      MechanismKind mechanism,
                                      const EmpiricalDistribution& reference) {
  const std::string tag = mechanism_name(mechanism);
  AttackStageResult result;
  for (const auto& [state, tables] : reference.states) {
    result.support_spaces.emplace(state, build_support_space(tables, config.generation.size_cap));
  }
  ViolationRule rule;
  std::map<std::string, size_t> index;
  {
    auto in = open_in(dir + "/detect_" + tag + ".txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = split_fields(line);
      if (f.size() != 4) throw std::runtime_error("detection file: malformed row");
      BlockAttackResult b;
      b.block_id = std::string(f[0]);
      b.state = state_from_block_id(b.block_id);
      b.flagged = parse_i64(f[1]) != 0;
      b.undetermined = parse_i64(f[2]) != 0;
      b.reconstructable = parse_i64(f[3]) != 0;
      index[b.block_id] = result.blocks.size();
      result.blocks.push_back(std::move(b));
    }
  }
  {
    auto in = open_in(dir + "/recon_" + tag + ".txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = split_fields(line);
      if (f.size() != 9) throw std::runtime_error("reconstruction file: malformed row");
      auto it = index.find(std::string(f[0]));
      if (it == index.end()) throw std::runtime_error("reconstruction file: unknown block");
      BlockAttackResult& b = result.blocks[it->second];
      size_t rank = static_cast<size_t>(parse_i64(f[1]));
      const ConfigurationSpace& space = result.support_spaces.at(b.state);
      while (b.reconstructions.size() <= rank) {
        Reconstruction r;
        r.block_id = b.block_id;
        r.status = SolveStatus::kOptimal;
        r.counts.assign(space.size(), 0);
        b.reconstructions.push_back(std::move(r));
      }
      HouseholdRecord cfg;
      cfg.size = static_cast<int>(parse_i64(f[2]));
      cfg.race_flags = parse_hex32(f[3]);
      cfg.children = static_cast<int>(parse_i64(f[4]));
      cfg.subsidized = parse_i64(f[5]) != 0;
      cfg.bedrooms = static_cast<BedroomClass>(parse_i64(f[6]));
      auto g = space.find(cfg);
      if (!g.has_value()) {
        throw std::runtime_error("reconstruction file: configuration outside the support space");
      }
      b.reconstructions[rank].counts[*g] = parse_i64(f[7]);
    }
    for (auto& b : result.blocks) {
      const ConfigurationSpace& space = result.support_spaces.at(b.state);
      for (auto& r : b.reconstructions) {
        for (size_t g = 0; g < r.counts.size(); ++g) {
          if (r.counts[g] > 0 && rule.violates(space.at(g))) {
            r.violating.emplace_back(g, r.counts[g]);
          }
        }
      }
      if (!b.reconstructions.empty()) {
        int64_t putative = 0;
        for (const auto& [g, c] : b.reconstructions.front().violating) putative += c;
        b.putative_violating = putative;
      }
    }
  }
  {
    auto in = open_in(dir + "/solvar_" + tag + ".txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = split_fields(line);
      if (f.size() != 6) throw std::runtime_error("solvar file: malformed row");
      auto it = index.find(std::string(f[0]));
      if (it == index.end()) throw std::runtime_error("solvar file: unknown block");
      SolvarReport sv;
      sv.attrs_label = std::string(f[1]);
      if (f[2] == "subsidized") {
        sv.subset = HouseholdSubset::kSubsidized;
      } else if (f[2] == "violating") {
        sv.subset = HouseholdSubset::kViolating;
      }
      sv.raw = parse_i64(f[3]);
      sv.normalized = parse_f64(f[4]);
      sv.exact = parse_i64(f[5]) != 0;
      result.blocks[it->second].solvar.push_back(std::move(sv));
    }
  }
  return result;
}

AttackReport run_scenario(const ScenarioConfig& config, const Universe& universe,
                          MechanismKind mechanism, const std::string& dir) {
  std::vector<BlockStatistics> stats = stage_publish(config, universe, mechanism, dir);
  AttackStageResult attack =
      stage_attack(config, stats, universe.empirical_reference, mechanism, dir);
  return stage_evaluate(config, universe, attack, mechanism, dir);
}

namespace {

void write_manifest(const std::string& dir, const ScenarioConfig& config,
                    const std::vector<std::pair<std::string, double>>& timings,
                    const std::string& status) {
  json j;
  j["tool"] = "blockrecon";
  j["version"] = "0.1.0";
  j["schema_version"] = 1;
  j["seed"] = config.seed;
  j["status"] = status;
  j["config"] = json::parse(config.to_json());
  json t = json::array();
  for (const auto& [stage, seconds] : timings) {
    t.push_back({{"stage", stage}, {"seconds", seconds}});
  }
  j["timings"] = t;
  auto out = open_out(dir + "/manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace

std::vector<AttackReport> run_sweep(const ScenarioConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, double>> timings;
  auto timed = [&](const std::string& stage, auto&& fn) {
    auto start = std::chrono::steady_clock::now();
    if (true) {
      fn();
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings.emplace_back(stage, s);
  };

  std::vector<AttackReport> reports;
  std::string failed_stage;
  try {
    Universe universe;
    timed("generate", [&] { universe = stage_generate(config, dir); });
    for (MechanismKind m :
         {MechanismKind::kIdentity, MechanismKind::kSwap, MechanismKind::kDp}) {
      failed_stage = mechanism_name(m);
      timed(mechanism_name(m), [&] { reports.push_back(run_scenario(config, universe, m, dir)); });
    }
    failed_stage = "report";
    timed("table", [&] {
      auto out = open_out(dir + "/table.txt");
      save_summary_table(reports, out);
    });
    timed("plots", [&] {
      std::filesystem::create_directories(dir + "/plots");
      stage_report(reports, dir + "/plots");
    });
  } catch (...) {
    write_manifest(dir, config, timings, "FAILED:" + failed_stage);
    throw;
  }
  write_manifest(dir, config, timings, "ok");
  return reports;
}

std::vector<std::string> stage_report(std::span<const AttackReport> reports,
                                      const std::string& dir) {
  std::filesystem::create_directories(dir);
  return emit_plots(reports, dir);
}

}  // namespace blockrecon
