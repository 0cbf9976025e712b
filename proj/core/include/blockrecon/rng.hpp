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

#ifndef BLOCKRECON_RNG_HPP_
#define BLOCKRECON_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace blockrecon {

// splitmix64 finalizer; used both as a mixer for seed derivation and to
// whiten small integer inputs.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream seed from (master seed, stage tag, index).
// Every parallel unit of work (block, state, query) gets one of these, so
// results do not depend on scheduling order or thread count.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
  return splitmix64(master ^ splitmix64(fnv1a(tag)) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// Deterministic random stream. Wraps mt19937_64 but implements its own
// bounded-integer and unit-interval draws: the std distributions are not
// pinned across library implementations, and regeneration from a seed must
// be bit-identical everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound) by rejection.
  uint64_t below(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    uint64_t x, r;
    do {
      x = next_u64();
      r = x % bound;
    } while (x - r > UINT64_MAX - (bound - 1));
    return r;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Index draw from non-negative weights by CDF inversion in index order.
  // All-zero weights are a caller bug.
  size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("Rng::categorical: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("Rng::categorical: zero weight mass");
    double u = next_double() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace blockrecon

#endif  // BLOCKRECON_RNG_HPP_
