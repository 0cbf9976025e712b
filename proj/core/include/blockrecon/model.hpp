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

#ifndef BLOCKRECON_MODEL_HPP_
#define BLOCKRECON_MODEL_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockrecon/rng.hpp"

namespace blockrecon {

// Bedroom count class of a subsidized unit. kNone marks households outside
// subsidized properties, which have no published bedroom count.
enum class BedroomClass : uint8_t { kLe1 = 0, kEq2 = 1, kGe3 = 2, kNone = 3 };

inline const char* bedroom_name(BedroomClass b) {
  switch (b) {
    case BedroomClass::kLe1: return "le1";
    case BedroomClass::kEq2: return "eq2";
    case BedroomClass::kGe3: return "ge3";
    default: return "none";
  }
}

// One household's reconstructable attributes. race_flags is a bit vector over
// the configured race/ethnicity groups; the generator sets exactly one flag
// (the householder's group), but nothing downstream assumes that.
struct HouseholdRecord {
  int size = 1;
  uint32_t race_flags = 0;
  int children = 0;
  bool subsidized = false;
  BedroomClass bedrooms = BedroomClass::kNone;

  int adults() const { return size - children; }
  bool has_children() const { return children > 0; }
  bool has_flag(int group) const { return (race_flags >> group) & 1u; }

  auto operator<=>(const HouseholdRecord&) const = default;

  // Throws std::invalid_argument on any invariant break:
  // size >= 1, 0 <= children <= size, at least one race flag,
  // bedrooms == kNone exactly when not subsidized.
  void validate() const;
};

// Occupancy limits per bedroom class ("no more than two persons per room";
// 3+ bedroom units are unconstrained).
struct ViolationRule {
  int le1_max = 2;
  int eq2_max = 4;

  int max_occupancy(BedroomClass b) const {
    switch (b) {
      case BedroomClass::kLe1: return le1_max;
      case BedroomClass::kEq2: return eq2_max;
      default: return std::numeric_limits<int>::max();
    }
  }

  bool violates(const HouseholdRecord& h) const {
    return h.subsidized && h.size > max_occupancy(h.bedrooms);
  }

  // True when a subsidized household of this size would violate in class b.
  bool would_violate(BedroomClass b, int size) const { return size > max_occupancy(b); }
};

struct Block {
  std::string id;
  int state = 0;
  double x = 0.0;
  double y = 0.0;
  std::vector<HouseholdRecord> households;

  int n_total() const { return static_cast<int>(households.size()); }
  int n_subsidized() const;
  int64_t population() const;
  void validate() const;
};

// SF1-side configuration key: the attributes visible in census microdata
// samples (no subsidized status, no bedroom count).
struct SfKey {
  int size = 1;
  uint32_t race_flags = 0;
  int children = 0;

  auto operator<=>(const SfKey&) const = default;
};

inline SfKey sf_key(const HouseholdRecord& h) { return SfKey{h.size, h.race_flags, h.children}; }

// Small integer-valued empirical distribution (value -> probability).
struct Categorical {
  std::vector<int> values;
  std::vector<double> probs;

  bool empty() const { return values.empty(); }
  int sample(Rng& rng) const;
  double mean() const;
  void normalize();
};

struct TailKey {
  uint32_t race_flags = 0;
  bool has_children = false;
  auto operator<=>(const TailKey&) const = default;
};

struct ChildKey {
  int size = 1;
  uint32_t race_flags = 0;
  auto operator<=>(const ChildKey&) const = default;
};

// Per-state frequency tables estimated from a household microdata sample.
// Serves as the attacker's prior, the generator's source for open-ended
// values, and (optionally, via violating_counts) the sampling baseline.
struct StateTables {
  int64_t sample_count = 0;                    // M, households in the sample
  std::map<SfKey, int64_t> config_counts;      // full-configuration counts
  std::map<TailKey, Categorical> tail_size;    // size distribution for sizes >= 7
  Categorical tail_fallback;                   // unconditional tail distribution
  std::map<ChildKey, Categorical> child_count; // children count (>= 1) given size/flags
  Categorical child_fallback;                  // unconditional children count
  std::array<double, 3> bedroom_prior = {0.0, 0.0, 0.0};  // le1, eq2, ge3
  std::vector<double> binary_priors;           // per race group, then has-children
  std::map<HouseholdRecord, int64_t> violating_counts;  // full configs of sampled violators

  // Empirical configuration probability; zero for configurations that never
  // appear in the sample (the support restriction used by the MLE attack).
  double census_prob(const SfKey& k) const;

  // Additively smoothed frequency (count + 0.5) / (M + 0.5); never zero.
  double smoothed_freq(const SfKey& k) const;

  void validate() const;
};

struct EmpiricalDistribution {
  std::map<int, StateTables> states;

  const StateTables& for_state(int state) const;
  void validate() const;

  void save(std::ostream& out) const;
  static EmpiricalDistribution load(std::istream& in);
};

// Counters for the documented fallback paths taken during generation.
struct GenerationLog {
  int64_t tail_fallbacks = 0;   // conditioning cell missing, used unconditional tail
  int64_t child_fallbacks = 0;  // conditioning cell missing, used unconditional table
  int64_t child_clamps = 0;     // empirical children draw exceeded household size
  int64_t swap_skips = 0;       // swap: no key-matching partner found
  std::vector<std::string> notes;

  void merge(const GenerationLog& other);
  void save(std::ostream& out) const;
};

struct GenerationConfig {
  int blocks = 200;
  int states = 1;
  int households_min = 11;
  int households_max = 30;
  int ns_floor = 11;            // published blocks carry at least this many subsidized households
  bool enforce_ns_floor = true;
  double alpha = 1e-4;          // bedroom reweighting scale for violating classes
  int n_groups = 8;             // race/ethnicity groups; last is Hispanic by default
  int hispanic_group = 7;
  int size_cap = 15;
  std::vector<double> size_weights;    // household size 1..size_cap
  std::vector<double> group_weights;   // householder group weights
  std::vector<double> child_presence;  // P(any child | size), indexed by size-1
  double child_count_decay = 0.55;     // geometric decay of children count within 1..size
  std::array<double, 3> bedroom_prior = {0.712, 0.286, 0.002};
  int super_households = 20000;  // per-state pool behind the empirical reference
  double sample_fraction = 0.20;
  double hud_response_rate = 1.0;  // fraction of subsidized households recorded on the HUD side

  static GenerationConfig defaults();
  void validate() const;  // throws std::invalid_argument with a reason
};

struct Universe {
  std::vector<Block> blocks;
  uint64_t seed = 0;
  double alpha = 0.0;
  int n_groups = 8;
  int hispanic_group = 7;
  EmpiricalDistribution empirical_reference;
  GenerationLog log;

  int64_t total_households() const;
};

// --- Generation samplers -----------------------------------------------
//
// The open-ended attributes of a skeleton household (exact size above the
// top size class, exact children count) are filled in by sampling the
// conditional empirical distributions; missing conditioning cells fall back
// to the unconditional tables and are counted in the log.

// record must be in the open-ended top size class. Returns a size >= 7 drawn
// conditionally on (race_flags, has-children flag).
int sample_tail_size(const HouseholdRecord& record, bool has_children, const StateTables& dist,
                     Rng& rng, GenerationLog* log = nullptr);

// record must be flagged as having children. Returns a count in [1, size];
// an empirical draw above the household size is clamped and logged.
int sample_children(const HouseholdRecord& record, const StateTables& dist, Rng& rng,
                    GenerationLog* log = nullptr);

// Marks exactly n_s households subsidized, drawn without replacement with
// probability proportional to prod p_l^{d_l} (1-p_l)^{1-d_l} divided by the
// smoothed empirical frequency of the household's configuration.
void assign_subsidized(Block& block, int n_s, const StateTables& priors, Rng& rng);

// Gives every subsidized household a bedroom class sampled from the bedroom
// prior, with classes that would violate the occupancy rule reweighted by
// alpha and the household's categorical renormalized. Violating classes come
// first in the inversion order so that, under common random numbers, the set
// of violating households is non-decreasing in alpha.
void assign_bedrooms(Block& block, const StateTables& priors, double alpha, Rng& rng,
                     const ViolationRule& rule = {});

// Deterministic synthesis of a universe: a per-state household pool is drawn
// from the configured categoricals, a fraction sample of it becomes the
// empirical reference, and each block is then generated from its own derived
// random stream (independent of thread scheduling).
Universe generate_universe(const GenerationConfig& config, uint64_t seed, int parallelism = 1);

// Same, but with externally supplied frequency tables instead of the
// internally generated pool sample.
Universe generate_universe(const GenerationConfig& config, const EmpiricalDistribution& reference,
                           uint64_t seed, int parallelism = 1);

// Builds per-state tables from a fraction sample of the realized universe,
// including the violating-configuration counts used by the sampling
// baseline.
EmpiricalDistribution sample_ground_truth(const Universe& universe, double fraction, uint64_t seed,
                                          const ViolationRule& rule = {});

// --- Universe serialization --------------------------------------------
// One household per line: block_id state x y size race_mask(hex) children
// subsidized bedroom_class, with a schema-version header.

void save_universe(const Universe& universe, std::ostream& out);
Universe load_universe(std::istream& in);

}  // namespace blockrecon

#endif  // BLOCKRECON_MODEL_HPP_
