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

#include <cstdint>
#include <stdexcept>

#include "blockrecon/mechanisms.hpp"

namespace blockrecon {

namespace {

using u128 = unsigned __int128;

// Uniform integer in [0, bound) for 128-bit bounds, by rejection.
u128 uniform_below_u128(u128 bound, Rng& rng) {
  if (bound == 0) throw std::logic_error("uniform_below_u128: zero bound");
  if (bound <= UINT64_MAX) return rng.below(static_cast<uint64_t>(bound));
  for (;;) {
    u128 x = (static_cast<u128>(rng.next_u64()) << 64) | rng.next_u64();
    u128 r = x % bound;
    if (x - r <= ~static_cast<u128>(0) - (bound - 1)) return r;
  }
}

// Bernoulli(num / den) with exact integer comparison.
bool bernoulli_frac(u128 num, u128 den, Rng& rng) {
  if (num >= den) return true;
  return uniform_below_u128(den, rng) < num;
}

// Bernoulli(exp(-num/den)) for num/den <= 1: von Neumann's series sampler.
// K counts successes of Bernoulli(gamma/k); the parity of the stopping index
// yields the exact probability.
bool bernoulli_exp_le1(u128 num, u128 den, Rng& rng) {
  u128 k = 1;
  for (;;) {
    u128 dk = den * k;
    if (k > 1 && dk / k != den) {
      // Denominator overflow is unreachable in practice (k stays tiny); fail
      // closed rather than sample from the wrong distribution.
      throw std::overflow_error("bernoulli_exp_le1: denominator overflow");
    }
    if (!bernoulli_frac(num, dk, rng)) break;
    ++k;
  }
  return (k % 2) == 1;
}

// Bernoulli(exp(-num/den)) for arbitrary non-negative rationals.
bool bernoulli_exp(u128 num, u128 den, Rng& rng) {
  while (num > den) {
    if (!bernoulli_exp_le1(1, 1, rng)) return false;  // factor exp(-1)
    num -= den;
  }
  return bernoulli_exp_le1(num, den, rng);
}

// Discrete Laplace with scale t (pmf proportional to exp(-|y|/t)).
int64_t discrete_laplace(uint64_t t, Rng& rng) {
  for (;;) {
    uint64_t u = rng.below(t);
    if (!bernoulli_exp(u, t, rng)) continue;
    uint64_t v = 0;
    while (bernoulli_exp_le1(1, 1, rng)) ++v;
    uint64_t magnitude = u + t * v;
    bool negative = bernoulli_frac(1, 2, rng);
    if (negative && magnitude == 0) continue;
    return negative ? -static_cast<int64_t>(magnitude) : static_cast<int64_t>(magnitude);
  }
}

// Integer square root (floor).
uint64_t isqrt_u128(u128 v) {
  if (v == 0) return 0;
  u128 x = v;
  u128 y = (x + 1) >> 1;
  while (y < x) {
    x = y;
    y = (x + v / x) >> 1;
  }
  return static_cast<uint64_t>(x);
}

}  // namespace

int64_t discrete_gaussian_noise(const Rational& variance, Rng& rng) {
  if (!(variance.num() > 0 && variance.den() > 0)) {
    throw std::invalid_argument("discrete_gaussian: variance must be positive");
  }
  const u128 num = static_cast<u128>(variance.num());
  const u128 den = static_cast<u128>(variance.den());

  // t = floor(sigma) + 1 where sigma^2 = num/den.
  const uint64_t t = isqrt_u128(num / den) + 1;

  // Rejection from discrete Laplace(t): accept Y with probability
  // exp(-(|Y| - sigma^2/t)^2 / (2 sigma^2)), evaluated exactly as the
  // rational (|Y| d t - n)^2 / (2 n d t^2).
  for (;;) {
    int64_t y = discrete_laplace(t, rng);
    u128 abs_y = static_cast<u128>(y < 0 ? -y : y);
    u128 lhs = abs_y * den * t;  // |Y| d t
    u128 diff = lhs > num ? lhs - num : num - lhs;
    u128 gamma_num = diff * diff;
    u128 gamma_den = 2 * num * den * static_cast<u128>(t) * static_cast<u128>(t);
    if (diff != 0 && gamma_num / diff != diff) {
      throw std::overflow_error("discrete_gaussian: acceptance ratio overflow");
    }
    if (bernoulli_exp(gamma_num, gamma_den, rng)) return y;
  }
}

int64_t discrete_gaussian(int64_t value, const Rational& variance, Rng& rng) {
  return value + discrete_gaussian_noise(variance, rng);
}

}  // namespace blockrecon
