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

#ifndef BLOCKRECON_PIPELINE_HPP_
#define BLOCKRECON_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "blockrecon/attack.hpp"
#include "blockrecon/mechanisms.hpp"
#include "blockrecon/model.hpp"
#include "blockrecon/plots.hpp"
#include "blockrecon/reident.hpp"
#include "blockrecon/workload.hpp"

namespace blockrecon {

enum class MechanismKind : uint8_t { kIdentity, kSwap, kDp };

const char* mechanism_name(MechanismKind k);

struct DpConfig {
  bool das_allocation = true;  // production-like allocation vs uniform split
  Rational rho_person{124, 25};
  Rational rho_household{77, 10};
  Rational uniform_rho{1, 10};
  bool noise_hud = false;
};

struct AttackConfig {
  int t = 100;        // reconstructions per block
  int t_floor = 10;   // aim for at least this many when budgets truncate
  double lambda = 1.0;
  int64_t max_nodes = 2'000'000;         // per solve (hard path)
  int64_t topt_node_budget = 4'000'000;  // per block enumeration; 0 = unlimited
  // Soft path (noisy statistics): optimality proofs are out of reach, so the
  // solves run to a node budget and keep their incumbents, flagged truncated.
  int soft_t = 10;
  int64_t soft_max_nodes = 1500;
  bool compute_solvar = true;
  std::vector<std::string> solvar_attrs = {"simpler"};    // "simpler" and/or "full"
  std::vector<std::string> solvar_subsets = {"all"};      // all / subsidized / violating
};

struct EvalConfig {
  std::vector<std::string> match_keys = {"hud", "broker", "sf1"};
  int k_max = 50;
  bool uniques_variants = true;
  double baseline_fraction = 0.20;
};

// Everything one scenario run needs; serializable, and replaying the same
// config and seed reproduces every metrics file byte for byte.
struct ScenarioConfig {
  int schema_version = 1;
  GenerationConfig generation;
  MechanismKind mechanism = MechanismKind::kIdentity;
  SwapConfig swap;
  DpConfig dp;
  AttackConfig attack;
  EvalConfig evaluation;
  uint64_t seed = 1;
  std::string output_dir = "out";
  int parallelism = 1;

  RaceGroups groups() const { return {generation.n_groups, generation.hispanic_group}; }

  static ScenarioConfig from_json_text(const std::string& text);
  static ScenarioConfig from_json_file(const std::string& path);
  std::string to_json() const;
  void validate() const;
};

// Thrown for malformed configuration (CLI exit code 2, vs 3 for stage
// failures).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- Stages -------------------------------------------------------------
// Each stage persists its artifacts under dir and returns the in-memory
// result. Filenames are fixed: universe.txt, empirical.txt, genlog.txt,
// stats_<mechanism>.txt, detect_<mechanism>.txt, recon_<mechanism>.txt,
// solvar_<mechanism>.txt, metrics_<mechanism>.txt, table.txt, manifest.json.

Universe stage_generate(const ScenarioConfig& config, const std::string& dir);

std::vector<BlockStatistics> stage_publish(const ScenarioConfig& config, const Universe& universe,
                                           MechanismKind mechanism, const std::string& dir);

struct BlockAttackResult {
  std::string block_id;
  int state = 0;
  bool flagged = false;
  bool undetermined = false;
  bool reconstructable = true;
  bool truncated = false;
  std::vector<Reconstruction> reconstructions;  // flagged blocks only
  std::vector<SolvarReport> solvar;
  int64_t putative_violating = 0;  // violating mass of the most likely reconstruction
};

struct AttackStageResult {
  std::vector<BlockAttackResult> blocks;
  // Support space per state, shared by evaluation for projections.
  std::map<int, ConfigurationSpace> support_spaces;
};

// Runs detection and reconstruction from published statistics and the
// empirical reference only (the attacker's view).
AttackStageResult stage_attack(const ScenarioConfig& config,
                               const std::vector<BlockStatistics>& stats,
                               const EmpiricalDistribution& reference, MechanismKind mechanism,
                               const std::string& dir);

AttackReport stage_evaluate(const ScenarioConfig& config, const Universe& truth,
                            const AttackStageResult& attack, MechanismKind mechanism,
                            const std::string& dir);

// Rebuilds an attack stage result from its persisted artifacts, so
// evaluation can run without re-attacking.
AttackStageResult load_attack_results(const ScenarioConfig& config, const std::string& dir,
                                      MechanismKind mechanism,
                                      const EmpiricalDistribution& reference);

// generate -> publish -> attack -> evaluate for one mechanism.
AttackReport run_scenario(const ScenarioConfig& config, const Universe& universe,
                          MechanismKind mechanism, const std::string& dir);

// Full sweep over identity / swap / dp on one generated universe, plus the
// comparison table and plots.
std::vector<AttackReport> run_sweep(const ScenarioConfig& config, const std::string& dir);

// Plot emission for previously produced reports.
std::vector<std::string> stage_report(std::span<const AttackReport> reports,
                                      const std::string& dir);

}  // namespace blockrecon

#endif  // BLOCKRECON_PIPELINE_HPP_
