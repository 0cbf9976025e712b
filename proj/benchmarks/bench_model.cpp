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

#include "blockrecon/model.hpp"

namespace {

using namespace blockrecon;

void BM_GenerateUniverse(benchmark::State& state) {
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.blocks = static_cast<int>(state.range(0));
  cfg.super_households = 4000;
  uint64_t seed = 1;
  for (auto _ : state) {
    Universe u = generate_universe(cfg, seed++);
    benchmark::DoNotOptimize(u);
  }
}
BENCHMARK(BM_GenerateUniverse)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
