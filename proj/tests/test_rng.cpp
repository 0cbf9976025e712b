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

#include "blockrecon/rational.hpp"
#include "blockrecon/rng.hpp"

namespace {

using namespace blockrecon;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical seeds produce identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived seeds differ by tag and index") {
  CHECK(derive_seed(1, "block", 0) != derive_seed(1, "block", 1));
  CHECK(derive_seed(1, "block", 0) != derive_seed(1, "sample", 0));
  CHECK(derive_seed(1, "block", 3) == derive_seed(1, "block", 3));
  CHECK(derive_seed(1, "block", 3) != derive_seed(2, "block", 3));
}

TEST_CASE("below stays inside the bound and covers it") {
  Rng rng(7);
  bool saw_zero = false, saw_top = false;
  for (int i = 0; i < 2000; ++i) {
    uint64_t v = rng.below(5);
    CHECK(v < 5);
    saw_zero |= v == 0;
    saw_top |= v == 4;
  }
  CHECK(saw_zero);
  CHECK(saw_top);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("categorical follows the weights") {
  Rng rng(11);
  std::vector<double> w = {1.0, 3.0};
  int hits = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) hits += rng.categorical(w) == 1 ? 1 : 0;
  double freq = static_cast<double>(hits) / trials;
  CHECK(freq == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("rational arithmetic is exact") {
  Rational a(1, 5000);
  Rational b = a / Rational(3360);
  CHECK(b == Rational(1, 16'800'000));
  CHECK(Rational::parse("4.96") == Rational(124, 25));
  CHECK(Rational::parse("-0.0002") == Rational(-1, 5000));
  CHECK(Rational::parse("77/10") == Rational(77, 10));
  Rational variance = (Rational(1, 16'800'000) * Rational(77, 10)).reciprocal();
  CHECK(variance == Rational(168'000'000, 77));
  CHECK_THROWS(Rational::parse("abc"));
  CHECK_THROWS(Rational(1, 0));
}

TEST_SUITE_END();

}  // namespace
