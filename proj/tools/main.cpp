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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blockrecon/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

using blockrecon::AttackReport;
using blockrecon::AttackStageResult;
using blockrecon::ConfigError;
using blockrecon::EmpiricalDistribution;
using blockrecon::MechanismKind;
using blockrecon::ScenarioConfig;
using blockrecon::Universe;

ScenarioConfig load_config(const std::string& path, uint64_t* seed_override,
                           const std::string& out_override, int parallel_override) {
  ScenarioConfig config =
      path.empty() ? ScenarioConfig{} : ScenarioConfig::from_json_file(path);
  if (seed_override != nullptr) config.seed = *seed_override;
  if (!out_override.empty()) config.output_dir = out_override;
  if (parallel_override > 0) config.parallelism = parallel_override;
  config.validate();
  return config;
}

MechanismKind parse_mechanism(const std::string& name) {
  if (name == "identity") return MechanismKind::kIdentity;
  if (name == "swap") return MechanismKind::kSwap;
  if (name == "dp") return MechanismKind::kDp;
  throw ConfigError("unknown mechanism '" + name + "' (identity/swap/dp)");
}

Universe read_universe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open universe file " + path);
  return blockrecon::load_universe(in);
}

EmpiricalDistribution read_empirical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open empirical file " + path);
  return EmpiricalDistribution::load(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reconstruction and re-identification experiments on linked block statistics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string mechanism_str;
  uint64_t seed = 0;
  bool seed_set = false;
  int parallel = 0;
  app.add_option("--config", config_path, "scenario configuration (JSON)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed, "seed override")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--parallel", parallel, "worker threads (overrides config)");

  auto* generate = app.add_subcommand("generate", "synthesize a universe and its reference tables");
  auto* publish = app.add_subcommand("publish", "evaluate the query workload and apply a mechanism");
  std::string universe_path;
  publish->add_option("--universe", universe_path, "universe file (defaults to <out>/universe.txt)");
  publish->add_option("--mechanism", mechanism_str, "identity/swap/dp (defaults to config)");
  auto* attack = app.add_subcommand("attack", "detect and reconstruct from published statistics");
  std::string stats_path, empirical_path;
  attack->add_option("--stats", stats_path, "statistics file (defaults to <out>/stats_<mechanism>.txt)");
  attack->add_option("--empirical", empirical_path,
                     "empirical reference tables (defaults to <out>/empirical.txt)");
  attack->add_option("--mechanism", mechanism_str, "identity/swap/dp (defaults to config)");
  auto* evaluate = app.add_subcommand("evaluate", "score attack results against the ground truth");
  evaluate->add_option("--universe", universe_path, "ground-truth universe file");
  evaluate->add_option("--empirical", empirical_path, "empirical reference tables");
  evaluate->add_option("--mechanism", mechanism_str, "identity/swap/dp (defaults to config)");
  auto* report = app.add_subcommand("report", "render plots from metrics files");
  std::vector<std::string> metrics_paths;
  report->add_option("--metrics", metrics_paths, "metrics files to plot")->expected(-1);
  auto* sweep = app.add_subcommand("sweep", "run identity, swap and dp end to end and compare");

  CLI11_PARSE(app, argc, argv);

  ScenarioConfig config;
  try {
    config = load_config(config_path, seed_set ? &seed : nullptr, out_dir, parallel);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string dir = config.output_dir;

  try {
    if (generate->parsed()) {
      Universe u = blockrecon::stage_generate(config, dir);
      std::cout << "generated " << u.blocks.size() << " blocks, " << u.total_households()
                << " households -> " << dir << "/universe.txt\n";
    } else if (publish->parsed()) {
      MechanismKind m =
          mechanism_str.empty() ? config.mechanism : parse_mechanism(mechanism_str);
      std::string upath = universe_path.empty() ? dir + "/universe.txt" : universe_path;
      Universe u = read_universe(upath);
      auto stats = blockrecon::stage_publish(config, u, m, dir);
      std::cout << "published " << stats.size() << " block statistics under mechanism "
                << blockrecon::mechanism_name(m) << '\n';
    } else if (attack->parsed()) {
      MechanismKind m =
          mechanism_str.empty() ? config.mechanism : parse_mechanism(mechanism_str);
      std::string spath = stats_path.empty()
                              ? dir + "/stats_" + blockrecon::mechanism_name(m) + ".txt"
                              : stats_path;
      std::string epath = empirical_path.empty() ? dir + "/empirical.txt" : empirical_path;
      std::ifstream in(spath);
      if (!in) throw std::runtime_error("cannot open statistics file " + spath);
      auto stats = blockrecon::load_statistics(in);
      EmpiricalDistribution reference = read_empirical(epath);
      AttackStageResult res = blockrecon::stage_attack(config, stats, reference, m, dir);
      int64_t flagged = 0;
      for (const auto& b : res.blocks) flagged += b.flagged ? 1 : 0;
      std::cout << "attacked " << res.blocks.size() << " blocks, flagged " << flagged << '\n';
    } else if (evaluate->parsed()) {
      MechanismKind m =
          mechanism_str.empty() ? config.mechanism : parse_mechanism(mechanism_str);
      std::string upath = universe_path.empty() ? dir + "/universe.txt" : universe_path;
      std::string epath = empirical_path.empty() ? dir + "/empirical.txt" : empirical_path;
      Universe u = read_universe(upath);
      EmpiricalDistribution reference = read_empirical(epath);
      AttackStageResult res = blockrecon::load_attack_results(config, dir, m, reference);
      AttackReport rep = blockrecon::stage_evaluate(config, u, res, m, dir);
      std::cout << "evaluated scenario " << rep.scenario << ": flagged " << rep.flagged_blocks
                << " of " << rep.true_violating_blocks << " violating blocks\n";
    } else if (report->parsed()) {
      std::vector<AttackReport> reports;
      for (const auto& p : metrics_paths) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open metrics file " + p);
        reports.push_back(AttackReport::load_metrics(in));
      }
      if (reports.empty()) throw ConfigError("report: need at least one --metrics file");
      auto written = blockrecon::stage_report(reports, dir + "/plots");
      std::cout << "wrote " << written.size() << " plot files to " << dir << "/plots\n";
    } else if (sweep->parsed()) {
      auto reports = blockrecon::run_sweep(config, dir);
      std::cout << "sweep complete; comparison table at " << dir << "/table.txt\n";
      for (const auto& r : reports) {
        std::cout << "  " << r.scenario << ": flagged " << r.flagged_blocks << ", precision "
                  << (r.block_precision.has_value() ? std::to_string(*r.block_precision) : "na")
                  << ", recall "
                  << (r.block_recall.has_value() ? std::to_string(*r.block_recall) : "na") << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "stage failure: " << e.what() << '\n';
    return kExitStage;
  }
  return kExitOk;
}
