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

#include "blockrecon/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "blockrecon/parallel.hpp"
#include "blockrecon/textio.hpp"

namespace blockrecon {

namespace {

constexpr double kTableTolerance = 1e-9;

// Block identifiers embed the state code, like real geographic identifiers;
// consumers that only see published statistics can still route each block to
// its state's frequency tables.
std::string block_label(int state, int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "s%02db%06d", state, index);
  return buf;
}

}  // namespace

void HouseholdRecord::validate() const {
  if (size < 1) throw std::invalid_argument("household size must be >= 1");
  if (children < 0 || children > size) {
    throw std::invalid_argument("children count must lie in [0, size]");
  }
  if (race_flags == 0) throw std::invalid_argument("at least one race flag must be set");
  if ((bedrooms == BedroomClass::kNone) != !subsidized) {
    throw std::invalid_argument("bedroom class must be none exactly for unsubsidized households");
  }
}

int Block::n_subsidized() const {
  int n = 0;
  for (const auto& h : households) n += h.subsidized ? 1 : 0;
  return n;
}

int64_t Block::population() const {
  int64_t p = 0;
  for (const auto& h : households) p += h.size;
  return p;
}

void Block::validate() const {
  for (const auto& h : households) h.validate();
}

int Categorical::sample(Rng& rng) const {
  if (values.empty()) throw std::logic_error("Categorical::sample on empty table");
  return values[rng.categorical(probs)];
}

double Categorical::mean() const {
  double m = 0.0;
  for (size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

void Categorical::normalize() {
  double total = 0.0;
  for (double p : probs) total += p;
  if (total <= 0.0) throw std::invalid_argument("Categorical: zero mass");
  for (double& p : probs) p /= total;
}

double StateTables::census_prob(const SfKey& k) const {
  auto it = config_counts.find(k);
  if (it == config_counts.end() || sample_count == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(sample_count);
}

double StateTables::smoothed_freq(const SfKey& k) const {
  auto it = config_counts.find(k);
  int64_t c = it == config_counts.end() ? 0 : it->second;
  return (static_cast<double>(c) + 0.5) / (static_cast<double>(sample_count) + 0.5);
}

namespace {

void check_sums_to_one(const Categorical& c, const char* what) {
  double total = 0.0;
  for (double p : c.probs) {
    if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kTableTolerance) {
    throw std::invalid_argument(std::string(what) + ": probabilities do not sum to 1");
  }
}

}  // namespace

void StateTables::validate() const {
  if (sample_count > 0) {
    int64_t total = 0;
    for (const auto& [k, c] : config_counts) total += c;
    if (total != sample_count) {
      throw std::invalid_argument("configuration counts do not sum to the sample count");
    }
  }
  for (const auto& [k, c] : tail_size) check_sums_to_one(c, "tail size table");
  if (!tail_fallback.empty()) check_sums_to_one(tail_fallback, "tail fallback table");
  for (const auto& [k, c] : child_count) check_sums_to_one(c, "children count table");
  if (!child_fallback.empty()) check_sums_to_one(child_fallback, "children fallback table");
  double b = bedroom_prior[0] + bedroom_prior[1] + bedroom_prior[2];
  if (std::abs(b - 1.0) > kTableTolerance) {
    throw std::invalid_argument("bedroom prior does not sum to 1");
  }
  for (double p : binary_priors) {
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument("binary priors must lie strictly inside (0, 1)");
    }
  }
}

const StateTables& EmpiricalDistribution::for_state(int state) const {
  auto it = states.find(state);
  if (it == states.end()) {
    throw std::out_of_range("no empirical tables for state " + std::to_string(state));
  }
  return it->second;
}

void EmpiricalDistribution::validate() const {
  for (const auto& [s, t] : states) t.validate();
}

void GenerationLog::merge(const GenerationLog& other) {
  tail_fallbacks += other.tail_fallbacks;
  child_fallbacks += other.child_fallbacks;
  child_clamps += other.child_clamps;
  swap_skips += other.swap_skips;
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

void GenerationLog::save(std::ostream& out) const {
  out << "tail_fallbacks " << tail_fallbacks << "\n";
  out << "child_fallbacks " << child_fallbacks << "\n";
  out << "child_clamps " << child_clamps << "\n";
  out << "swap_skips " << swap_skips << "\n";
  for (const auto& n : notes) out << "note " << n << "\n";
}

GenerationConfig GenerationConfig::defaults() {
  GenerationConfig c;
  // Size mix for block households; the tail above the top size class is what
  // the tail sampler fills in.
  c.size_weights = {0.24, 0.30, 0.16, 0.125, 0.08, 0.05, 0.02, 0.01,
                    0.006, 0.004, 0.002, 0.0013, 0.0008, 0.0005, 0.0004};
  c.group_weights = {0.42, 0.16, 0.015, 0.05, 0.004, 0.016, 0.025, 0.21};
  c.child_presence = {0.01, 0.22, 0.55, 0.70, 0.76, 0.80, 0.84, 0.86,
                      0.88, 0.88, 0.88, 0.88, 0.88, 0.88, 0.88};
  return c;
}

void GenerationConfig::validate() const {
  if (blocks < 1) throw std::invalid_argument("config: blocks must be >= 1");
  if (states < 1) throw std::invalid_argument("config: states must be >= 1");
  if (households_min < 1 || households_max < households_min) {
    throw std::invalid_argument("config: invalid household count range");
  }
  if (enforce_ns_floor && ns_floor > households_min) {
    throw std::invalid_argument(
        "config: subsidized floor exceeds the minimum household count; some block would need "
        "more subsidized households than it has");
  }
  if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
  if (n_groups < 1 || n_groups > 16) throw std::invalid_argument("config: n_groups must be in [1, 16]");
  if (hispanic_group < 0 || hispanic_group >= n_groups) {
    throw std::invalid_argument("config: hispanic group index out of range");
  }
  if (size_cap < 7) throw std::invalid_argument("config: size cap must be >= 7");
  if (static_cast<int>(size_weights.size()) != size_cap) {
    throw std::invalid_argument("config: size_weights must have size_cap entries");
  }
  if (static_cast<int>(group_weights.size()) != n_groups) {
    throw std::invalid_argument("config: group_weights must have n_groups entries");
  }
  if (static_cast<int>(child_presence.size()) != size_cap) {
    throw std::invalid_argument("config: child_presence must have size_cap entries");
  }
  double btot = bedroom_prior[0] + bedroom_prior[1] + bedroom_prior[2];
  if (std::abs(btot - 1.0) > 1e-9) throw std::invalid_argument("config: bedroom prior must sum to 1");
  if (alpha == 0.0 && bedroom_prior[2] <= 0.0) {
    throw std::invalid_argument("config: alpha = 0 requires positive mass on the 3+ bedroom class");
  }
  if (!(child_count_decay > 0.0 && child_count_decay < 1.0)) {
    throw std::invalid_argument("config: child_count_decay must lie in (0, 1)");
  }
  if (super_households < 100) throw std::invalid_argument("config: super_households too small");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw std::invalid_argument("config: sample_fraction must lie in (0, 1]");
  }
  if (!(hud_response_rate > 0.0 && hud_response_rate <= 1.0)) {
    throw std::invalid_argument("config: hud_response_rate must lie in (0, 1]");
  }
}

int64_t Universe::total_households() const {
  int64_t n = 0;
  for (const auto& b : blocks) n += b.n_total();
  return n;
}

// --- Samplers -------------------------------------------------------------

int sample_tail_size(const HouseholdRecord& record, bool has_children, const StateTables& dist,
                     Rng& rng, GenerationLog* log) {
  TailKey key{record.race_flags, has_children};
  auto it = dist.tail_size.find(key);
  if (it != dist.tail_size.end() && !it->second.empty()) {
    return it->second.sample(rng);
  }
  if (log) ++log->tail_fallbacks;
  if (dist.tail_fallback.empty()) {
    throw std::logic_error("no tail size table available, not even the unconditional fallback");
  }
  return dist.tail_fallback.sample(rng);
}

int sample_children(const HouseholdRecord& record, const StateTables& dist, Rng& rng,
                    GenerationLog* log) {
  ChildKey key{record.size, record.race_flags};
  auto it = dist.child_count.find(key);
  const Categorical* table = nullptr;
  if (it != dist.child_count.end() && !it->second.empty()) {
    table = &it->second;
  } else {
    if (log) ++log->child_fallbacks;
    if (dist.child_fallback.empty()) {
      throw std::logic_error("no children count table available");
    }
    table = &dist.child_fallback;
  }
  int c = table->sample(rng);
  if (c > record.size) {
    if (log) ++log->child_clamps;
    c = record.size;
  }
  return std::max(1, c);
}

void assign_subsidized(Block& block, int n_s, const StateTables& priors, Rng& rng) {
  const int n = block.n_total();
  if (n_s > n) throw std::invalid_argument("assign_subsidized: n_s exceeds household count");
  const int n_groups = static_cast<int>(priors.binary_priors.size()) - 1;
  if (n_groups < 1) throw std::invalid_argument("assign_subsidized: priors missing");

  // Heuristic likelihood: product of independent binary priors over the
  // HUD-visible attributes, divided by the smoothed empirical frequency of
  // the configuration. Rare configurations get upweighted by the division.
  std::vector<double> weights(n);
  for (int i = 0; i < n; ++i) {
    const HouseholdRecord& h = block.households[i];
    double w = 1.0;
    for (int g = 0; g < n_groups; ++g) {
      double p = priors.binary_priors[g];
      w *= h.has_flag(g) ? p : (1.0 - p);
    }
    double pc = priors.binary_priors[n_groups];
    w *= h.has_children() ? pc : (1.0 - pc);
    weights[i] = w / priors.smoothed_freq(sf_key(h));
  }

  // Sequential weighted draws without replacement.
  std::vector<int> remaining(n);
  for (int i = 0; i < n; ++i) remaining[i] = i;
  for (int k = 0; k < n_s; ++k) {
    std::vector<double> w;
    w.reserve(remaining.size());
    for (int idx : remaining) w.push_back(weights[idx]);
    size_t pick = rng.categorical(w);
    block.households[remaining[pick]].subsidized = true;
    remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(pick));
  }
  for (auto& h : block.households) {
    if (!h.subsidized) h.bedrooms = BedroomClass::kNone;
  }
}

void assign_bedrooms(Block& block, const StateTables& priors, double alpha, Rng& rng,
                     const ViolationRule& rule) {
  if (alpha < 0.0) throw std::invalid_argument("assign_bedrooms: alpha must be >= 0");
  static constexpr BedroomClass kClasses[3] = {BedroomClass::kLe1, BedroomClass::kEq2,
                                               BedroomClass::kGe3};
  for (auto& h : block.households) {
    if (!h.subsidized) continue;
    // Violating classes first in the inversion order (see header).
    BedroomClass order[3];
    double weight[3];
    int m = 0;
    for (BedroomClass b : kClasses) {
      if (rule.would_violate(b, h.size)) {
        order[m] = b;
        weight[m] = priors.bedroom_prior[static_cast<int>(b)] * alpha;
        ++m;
      }
    }
    for (BedroomClass b : kClasses) {
      if (!rule.would_violate(b, h.size)) {
        order[m] = b;
        weight[m] = priors.bedroom_prior[static_cast<int>(b)];
        ++m;
      }
    }
    double total = weight[0] + weight[1] + weight[2];
    if (total <= 0.0) {
      // Only reachable with alpha = 0 and zero prior mass on every legal
      // class; the 3+ bedroom class is legal for every size.
      throw std::logic_error("assign_bedrooms: zero sampling mass");
    }
    double u = rng.next_double() * total;
    double acc = 0.0;
    h.bedrooms = order[2];
    for (int i = 0; i < 3; ++i) {
      acc += weight[i];
      if (u < acc) {
        h.bedrooms = order[i];
        break;
      }
    }
  }
}

// --- Universe generation ----------------------------------------------------

namespace {

// Fully realized parametric household draw (used for the reference pool).
HouseholdRecord draw_pool_household(const GenerationConfig& cfg, Rng& rng) {
  HouseholdRecord h;
  h.size = 1 + static_cast<int>(rng.categorical(cfg.size_weights));
  int group = static_cast<int>(rng.categorical(cfg.group_weights));
  h.race_flags = 1u << group;
  bool kids = rng.bernoulli(cfg.child_presence[h.size - 1]);
  if (kids) {
    // Truncated geometric on [1, size].
    std::vector<double> w(static_cast<size_t>(h.size));
    double p = 1.0;
    for (int c = 0; c < h.size; ++c) {
      w[c] = p;
      p *= cfg.child_count_decay;
    }
    h.children = 1 + static_cast<int>(rng.categorical(w));
  }
  return h;
}

StateTables build_tables(const GenerationConfig& cfg, const std::vector<HouseholdRecord>& sample) {
  StateTables t;
  t.sample_count = static_cast<int64_t>(sample.size());
  std::map<TailKey, std::map<int, int64_t>> tails;
  std::map<int, int64_t> tail_all;
  std::map<ChildKey, std::map<int, int64_t>> childs;
  std::map<int, int64_t> child_all;
  std::vector<int64_t> flag_counts(static_cast<size_t>(cfg.n_groups), 0);
  int64_t with_children = 0;
  for (const auto& h : sample) {
    ++t.config_counts[sf_key(h)];
    if (h.size >= 7) {
      ++tails[TailKey{h.race_flags, h.has_children()}][h.size];
      ++tail_all[h.size];
    }
    if (h.children >= 1) {
      ++childs[ChildKey{h.size, h.race_flags}][h.children];
      ++child_all[h.children];
    }
    for (int g = 0; g < cfg.n_groups; ++g) {
      if (h.has_flag(g)) ++flag_counts[g];
    }
    if (h.has_children()) ++with_children;
  }
  auto to_categorical = [](const std::map<int, int64_t>& counts) {
    Categorical c;
    for (const auto& [v, n] : counts) {
      c.values.push_back(v);
      c.probs.push_back(static_cast<double>(n));
    }
    c.normalize();
    return c;
  };
  for (const auto& [k, m] : tails) t.tail_size[k] = to_categorical(m);
  if (!tail_all.empty()) {
    t.tail_fallback = to_categorical(tail_all);
  } else {
    // A sample with no 7+ households still needs a usable tail table.
    t.tail_fallback.values = {7};
    t.tail_fallback.probs = {1.0};
  }
  for (const auto& [k, m] : childs) t.child_count[k] = to_categorical(m);
  if (!child_all.empty()) {
    t.child_fallback = to_categorical(child_all);
  } else {
    t.child_fallback.values = {1};
    t.child_fallback.probs = {1.0};
  }
  const double m = static_cast<double>(sample.size());
  t.binary_priors.resize(static_cast<size_t>(cfg.n_groups) + 1);
  for (int g = 0; g < cfg.n_groups; ++g) {
    t.binary_priors[g] = (static_cast<double>(flag_counts[g]) + 0.5) / (m + 1.0);
  }
  t.binary_priors[cfg.n_groups] = (static_cast<double>(with_children) + 0.5) / (m + 1.0);
  t.bedroom_prior = cfg.bedroom_prior;
  return t;
}

Block generate_block(const GenerationConfig& cfg, const StateTables& tables, int index,
                     uint64_t seed, GenerationLog& log) {
  Rng rng(derive_seed(seed, "block", static_cast<uint64_t>(index)));
  Block block;
  block.state = index % cfg.states;
  block.id = block_label(block.state, index);
  block.x = rng.next_double();
  block.y = rng.next_double();

  int span = cfg.households_max - cfg.households_min + 1;
  int n = cfg.households_min + static_cast<int>(rng.below(static_cast<uint64_t>(span)));
  int ns_lo = cfg.enforce_ns_floor ? cfg.ns_floor : 1;
  int n_s = ns_lo + static_cast<int>(rng.below(static_cast<uint64_t>(n - ns_lo + 1)));
  if (cfg.hud_response_rate < 1.0) {
    int recorded = 0;
    for (int i = 0; i < n_s; ++i) recorded += rng.bernoulli(cfg.hud_response_rate) ? 1 : 0;
    if (cfg.enforce_ns_floor) recorded = std::max(recorded, std::min(cfg.ns_floor, n_s));
    n_s = recorded;
  }

  block.households.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Skeleton in published-microdata form: size class, householder group,
    // has-children flag. Open-ended values come from the empirical tables.
    HouseholdRecord h;
    int parametric_size = 1 + static_cast<int>(rng.categorical(cfg.size_weights));
    int group = static_cast<int>(rng.categorical(cfg.group_weights));
    h.race_flags = 1u << group;
    bool kids = rng.bernoulli(cfg.child_presence[parametric_size - 1]);
    if (parametric_size >= 7) {
      h.size = sample_tail_size(h, kids, tables, rng, &log);
    } else {
      h.size = parametric_size;
    }
    h.children = kids ? sample_children(h, tables, rng, &log) : 0;
    block.households.push_back(h);
  }

  assign_subsidized(block, n_s, tables, rng);
  assign_bedrooms(block, tables, cfg.alpha, rng);
  block.validate();
  return block;
}

}  // namespace

Universe generate_universe(const GenerationConfig& config, const EmpiricalDistribution& reference,
                           uint64_t seed, int parallelism) {
  config.validate();
  reference.validate();
  for (int s = 0; s < config.states; ++s) reference.for_state(s);

  Universe u;
  u.seed = seed;
  u.alpha = config.alpha;
  u.n_groups = config.n_groups;
  u.hispanic_group = config.hispanic_group;
  u.empirical_reference = reference;
  u.blocks.resize(static_cast<size_t>(config.blocks));
  std::vector<GenerationLog> logs(static_cast<size_t>(config.blocks));
  parallel_for(static_cast<size_t>(config.blocks), parallelism, [&](size_t i) {
    const StateTables& tables = u.empirical_reference.for_state(static_cast<int>(i) % config.states);
    u.blocks[i] = generate_block(config, tables, static_cast<int>(i), seed, logs[i]);
  });
  for (const auto& l : logs) u.log.merge(l);
  return u;
}

Universe generate_universe(const GenerationConfig& config, uint64_t seed, int parallelism) {
  config.validate();
  EmpiricalDistribution reference;
  std::vector<StateTables> tables(static_cast<size_t>(config.states));
  parallel_for(static_cast<size_t>(config.states), parallelism, [&](size_t s) {
    Rng pool_rng(derive_seed(seed, "pool", s));
    Rng sample_rng(derive_seed(seed, "sample", s));
    std::vector<HouseholdRecord> sample;
    sample.reserve(static_cast<size_t>(config.super_households * config.sample_fraction * 1.1) + 16);
    for (int i = 0; i < config.super_households; ++i) {
      HouseholdRecord h = draw_pool_household(config, pool_rng);
      if (sample_rng.bernoulli(config.sample_fraction)) sample.push_back(h);
    }
    tables[s] = build_tables(config, sample);
  });
  for (int s = 0; s < config.states; ++s) reference.states[s] = std::move(tables[static_cast<size_t>(s)]);
  return generate_universe(config, reference, seed, parallelism);
}

EmpiricalDistribution sample_ground_truth(const Universe& universe, double fraction, uint64_t seed,
                                          const ViolationRule& rule) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("sample_ground_truth: fraction must lie in (0, 1]");
  }
  GenerationConfig cfg = GenerationConfig::defaults();
  cfg.n_groups = universe.n_groups;
  cfg.hispanic_group = universe.hispanic_group;
  std::map<int, std::vector<HouseholdRecord>> samples;
  std::map<int, std::map<HouseholdRecord, int64_t>> violating;
  for (size_t b = 0; b < universe.blocks.size(); ++b) {
    const Block& block = universe.blocks[b];
    Rng rng(derive_seed(seed, "truth-sample", b));
    for (const auto& h : block.households) {
      if (!rng.bernoulli(fraction)) continue;
      samples[block.state].push_back(h);
      if (rule.violates(h)) ++violating[block.state][h];
    }
  }
  EmpiricalDistribution dist;
  for (auto& [state, sample] : samples) {
    StateTables t = build_tables(cfg, sample);
    t.violating_counts = violating[state];
    dist.states[state] = std::move(t);
  }
  return dist;
}

// --- Serialization -----------------------------------------------------------

void save_universe(const Universe& universe, std::ostream& out) {
  out << "# blockrecon universe v1\n";
  out << "# seed " << universe.seed << " alpha " << format_double(universe.alpha) << " groups "
      << universe.n_groups << " hispanic " << universe.hispanic_group << "\n";
  out << "# block_id state x y size race_mask children subsidized bedroom\n";
  char mask[16];
  for (const auto& b : universe.blocks) {
    for (const auto& h : b.households) {
      std::snprintf(mask, sizeof(mask), "%x", h.race_flags);
      out << b.id << ' ' << b.state << ' ' << format_double(b.x) << ' ' << format_double(b.y)
          << ' ' << h.size << ' ' << mask << ' ' << h.children << ' ' << (h.subsidized ? 1 : 0)
          << ' ' << static_cast<int>(h.bedrooms) << '\n';
    }
  }
}

Universe load_universe(std::istream& in) {
  Universe u;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# blockrecon universe v1", 0) != 0) {
    throw std::runtime_error("universe file: missing or unsupported schema header");
  }
  Block* current = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto f = split_fields(line);
      for (size_t i = 1; i + 1 < f.size(); i += 2) {
        if (f[i] == "seed") u.seed = static_cast<uint64_t>(parse_i64(f[i + 1]));
        if (f[i] == "alpha") u.alpha = parse_f64(f[i + 1]);
        if (f[i] == "groups") u.n_groups = static_cast<int>(parse_i64(f[i + 1]));
        if (f[i] == "hispanic") u.hispanic_group = static_cast<int>(parse_i64(f[i + 1]));
      }
      continue;
    }
    auto f = split_fields(line);
    if (f.size() != 9) throw std::runtime_error("universe file: malformed household line");
    std::string id(f[0]);
    if (current == nullptr || current->id != id) {
      Block b;
      b.id = id;
      b.state = static_cast<int>(parse_i64(f[1]));
      b.x = parse_f64(f[2]);
      b.y = parse_f64(f[3]);
      u.blocks.push_back(std::move(b));
      current = &u.blocks.back();
    }
    HouseholdRecord h;
    h.size = static_cast<int>(parse_i64(f[4]));
    h.race_flags = parse_hex32(f[5]);
    h.children = static_cast<int>(parse_i64(f[6]));
    h.subsidized = parse_i64(f[7]) != 0;
    h.bedrooms = static_cast<BedroomClass>(parse_i64(f[8]));
    h.validate();
    current->households.push_back(h);
  }
  return u;
}

// --- EmpiricalDistribution serialization -------------------------------------

namespace {

void save_categorical(std::ostream& out, const char* tag, const std::string& prefix,
                      const Categorical& c) {
  for (size_t i = 0; i < c.values.size(); ++i) {
    out << tag << ' ' << prefix << c.values[i] << ' ' << format_double(c.probs[i]) << '\n';
  }
}

}  // namespace

void EmpiricalDistribution::save(std::ostream& out) const {
  out << "# blockrecon empirical v1\n";
  char hex[16];
  for (const auto& [state, t] : states) {
    out << "state " << state << '\n';
    out << "samples " << t.sample_count << '\n';
    for (const auto& [k, c] : t.config_counts) {
      std::snprintf(hex, sizeof(hex), "%x", k.race_flags);
      out << "config " << k.size << ' ' << hex << ' ' << k.children << ' ' << c << '\n';
    }
    for (const auto& [k, c] : t.tail_size) {
      std::snprintf(hex, sizeof(hex), "%x %d ", k.race_flags, k.has_children ? 1 : 0);
      save_categorical(out, "tail", hex, c);
    }
    save_categorical(out, "tailfb", "", t.tail_fallback);
    for (const auto& [k, c] : t.child_count) {
      std::snprintf(hex, sizeof(hex), "%d %x ", k.size, k.race_flags);
      save_categorical(out, "child", hex, c);
    }
    save_categorical(out, "childfb", "", t.child_fallback);
    out << "bedroom " << format_double(t.bedroom_prior[0]) << ' '
        << format_double(t.bedroom_prior[1]) << ' ' << format_double(t.bedroom_prior[2]) << '\n';
    for (size_t i = 0; i < t.binary_priors.size(); ++i) {
      out << "binary " << i << ' ' << format_double(t.binary_priors[i]) << '\n';
    }
    for (const auto& [h, c] : t.violating_counts) {
      std::snprintf(hex, sizeof(hex), "%x", h.race_flags);
      out << "violating " << h.size << ' ' << hex << ' ' << h.children << ' '
          << (h.subsidized ? 1 : 0) << ' ' << static_cast<int>(h.bedrooms) << ' ' << c << '\n';
    }
    out << "end\n";
  }
}

EmpiricalDistribution EmpiricalDistribution::load(std::istream& in) {
  EmpiricalDistribution dist;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# blockrecon empirical v1", 0) != 0) {
    throw std::runtime_error("empirical file: missing or unsupported schema header");
  }
  StateTables* t = nullptr;
  auto add_cat = [](Categorical& c, int value, double p) {
    c.values.push_back(value);
    c.probs.push_back(p);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_fields(line);
    const auto& tag = f[0];
    if (tag == "state") {
      t = &dist.states[static_cast<int>(parse_i64(f[1]))];
    } else if (t == nullptr) {
      throw std::runtime_error("empirical file: table row before any state header");
    } else if (tag == "samples") {
      t->sample_count = parse_i64(f[1]);
    } else if (tag == "config") {
      t->config_counts[SfKey{static_cast<int>(parse_i64(f[1])), parse_hex32(f[2]),
                             static_cast<int>(parse_i64(f[3]))}] = parse_i64(f[4]);
    } else if (tag == "tail") {
      add_cat(t->tail_size[TailKey{parse_hex32(f[1]), parse_i64(f[2]) != 0}],
              static_cast<int>(parse_i64(f[3])), parse_f64(f[4]));
    } else if (tag == "tailfb") {
      add_cat(t->tail_fallback, static_cast<int>(parse_i64(f[1])), parse_f64(f[2]));
    } else if (tag == "child") {
      add_cat(t->child_count[ChildKey{static_cast<int>(parse_i64(f[1])), parse_hex32(f[2])}],
              static_cast<int>(parse_i64(f[3])), parse_f64(f[4]));
    } else if (tag == "childfb") {
      add_cat(t->child_fallback, static_cast<int>(parse_i64(f[1])), parse_f64(f[2]));
    } else if (tag == "bedroom") {
      t->bedroom_prior = {parse_f64(f[1]), parse_f64(f[2]), parse_f64(f[3])};
    } else if (tag == "binary") {
      size_t idx = static_cast<size_t>(parse_i64(f[1]));
      if (t->binary_priors.size() <= idx) t->binary_priors.resize(idx + 1);
      t->binary_priors[idx] = parse_f64(f[2]);
    } else if (tag == "violating") {
      HouseholdRecord h;
      h.size = static_cast<int>(parse_i64(f[1]));
      h.race_flags = parse_hex32(f[2]);
      h.children = static_cast<int>(parse_i64(f[3]));
      h.subsidized = parse_i64(f[4]) != 0;
      h.bedrooms = static_cast<BedroomClass>(parse_i64(f[5]));
      t->violating_counts[h] = parse_i64(f[6]);
    } else if (tag == "end") {
      t = nullptr;
    } else {
      throw std::runtime_error("empirical file: unknown row tag '" + std::string(tag) + "'");
    }
  }
  return dist;
}

}  // namespace blockrecon
