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

#include "blockrecon/mechanisms.hpp"

namespace {

using namespace blockrecon;

void BM_DiscreteGaussianUnit(benchmark::State& state) {
  Rng rng(11);
  Rational variance(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(discrete_gaussian_noise(variance, rng));
  }
}
BENCHMARK(BM_DiscreteGaussianUnit);

void BM_DiscreteGaussianWide(benchmark::State& state) {
  Rng rng(11);
  Rational variance(168000000, 77);  // production-scale size-bin variance
  for (auto _ : state) {
    benchmark::DoNotOptimize(discrete_gaussian_noise(variance, rng));
  }
}
BENCHMARK(BM_DiscreteGaussianWide);

}  // namespace
