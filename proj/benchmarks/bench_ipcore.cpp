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

#include <benchmark/benchmark.h>

#include "blockrecon/attack.hpp"
#include "blockrecon/model.hpp"
#include "blockrecon/workload.hpp"

namespace {

using namespace blockrecon;

struct Fixture {
  GenerationConfig gen;
  Universe universe;
  std::vector<CountingQuery> workload;
  ConfigurationSpace detect_space;
  std::vector<BlockStatistics> stats;

  Fixture() {
    gen = GenerationConfig::defaults();
    gen.blocks = 64;
    gen.super_households = 4000;
    universe = generate_universe(gen, 7);
    workload = standard_workload({gen.n_groups, gen.hispanic_group});
    AttackSpaceOptions opts;
    opts.groups = {gen.n_groups, gen.hispanic_group};
    opts.size_cap = gen.size_cap;
    detect_space = build_attack_space(opts);
    for (const auto& b : universe.blocks) stats.push_back(evaluate_block(b, workload));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_DetectBlock(benchmark::State& state) {
  Fixture& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    auto r = detect_violation_block(f.stats[i % f.stats.size()], f.detect_space, f.workload);
    benchmark::DoNotOptimize(r);
    ++i;
  }
}
BENCHMARK(BM_DetectBlock)->Unit(benchmark::kMillisecond);

void BM_ReconstructMle(benchmark::State& state) {
  Fixture& f = fixture();
  const StateTables& prior = f.universe.empirical_reference.for_state(0);
  ConfigurationSpace support = build_support_space(prior, f.gen.size_cap);
  size_t i = 0;
  for (auto _ : state) {
    auto r = reconstruct_mle(f.stats[i % f.stats.size()], support, prior, f.workload);
    benchmark::DoNotOptimize(r);
    ++i;
  }
}
BENCHMARK(BM_ReconstructMle)->Unit(benchmark::kMillisecond);

}  // namespace
