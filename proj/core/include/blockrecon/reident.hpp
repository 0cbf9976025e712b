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

#ifndef BLOCKRECON_REIDENT_HPP_
#define BLOCKRECON_REIDENT_HPP_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "blockrecon/attack.hpp"
#include "blockrecon/model.hpp"

namespace blockrecon {

struct HouseholdRef {
  int32_t block = 0;
  int32_t index = 0;
  auto operator<=>(const HouseholdRef&) const = default;
};

// Identified partial microdata: every covered ground-truth household's
// projection onto the key attributes, with its identifier.
struct MatchKey {
  AttributeSet attrs;
  bool subsidized_only = false;  // the identified data covers only subsidized households

  struct Record {
    HouseholdRef id;
    std::vector<int64_t> key;
  };
  std::vector<Record> records;  // (block, index) order

  static MatchKey build(const Universe& universe, const AttributeSet& attrs, bool subsidized_only);
};

// Candidate household configurations ordered by how often they appear in
// violation, ties broken by the projected configuration itself.
struct RankedCandidates {
  enum class Provenance : uint8_t { kReconstruction, kSamplingBaseline };
  struct Entry {
    std::vector<int64_t> key;
    int64_t score = 0;
  };
  std::vector<Entry> entries;  // score descending, then key ascending
  Provenance provenance = Provenance::kReconstruction;
};

// Scores each projected configuration by its total violating count mass
// across the reconstructions (all of one block).
RankedCandidates rank_from_reconstructions(std::span<const Reconstruction> recons,
                                           const ConfigurationSpace& space,
                                           const AttributeSet& attrs,
                                           const ViolationRule& rule = {});

// Worst-case distributional baseline: configurations ranked by how often
// they appear in violation in a ground-truth microdata sample.
RankedCandidates sampling_baseline(const StateTables& sample, const AttributeSet& attrs);

// Identified households in flagged blocks whose key projection matches one of
// the top-k ranked configurations. uniques_only keeps only households whose
// projection is unique within their block among covered households.
std::vector<HouseholdRef> putative_violations(const RankedCandidates& ranking, const MatchKey& key,
                                              int k, std::span<const int32_t> flagged_blocks,
                                              bool uniques_only);

std::vector<HouseholdRef> true_violations(const Universe& universe, const ViolationRule& rule = {});
std::vector<int32_t> violating_blocks(const Universe& universe, const ViolationRule& rule = {});

struct ScoreResult {
  std::optional<double> precision;  // null when no putative violations
  std::optional<double> recall;     // null when no true violations
  std::optional<double> match_rate;
  int64_t true_positives = 0;
};

// Precision = |V intersect Vhat| / |Vhat|, recall = |V intersect Vhat| / |V|,
// match rate = fraction of the top-k ranked configurations matching at least
// one true violating household covered by the key.
ScoreResult score(std::span<const HouseholdRef> putative, std::span<const HouseholdRef> truth,
                  const RankedCandidates& ranking, int k, const MatchKey& key);

struct BlockMetrics {
  int64_t flagged = 0;
  int64_t true_violating = 0;
  int64_t flagged_true = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

BlockMetrics block_metrics(std::span<const int32_t> flagged_blocks, const Universe& truth,
                           const ViolationRule& rule = {});

// Per-scenario evaluation artifact.
struct CurvePoint {
  int k = 0;
  int64_t v_hat = 0;
  int64_t true_positives = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> match_rate;
};

struct Curve {
  std::string key_label;
  bool uniques_only = false;
  std::vector<CurvePoint> points;
};

struct AttackReport {
  std::string scenario;
  int64_t true_violating_blocks = 0;
  int64_t flagged_blocks = 0;
  int64_t flagged_true = 0;
  int64_t undetermined_blocks = 0;
  int64_t unreconstructable_blocks = 0;
  std::optional<double> block_precision;
  std::optional<double> block_recall;
  int64_t true_violating_households = 0;
  std::vector<Curve> curves;
  std::map<std::string, std::vector<double>> solvar_normalized;      // by attribute-set label
  std::vector<std::pair<int64_t, int64_t>> violation_scatter;        // (true, putative) per flagged block

  // Delimited rows: scenario k metric value. Reload-able, byte-stable.
  void save_metrics(std::ostream& out) const;
  static AttackReport load_metrics(std::istream& in);
};

// Fixed-width comparison table over scenarios (one column per report).
void save_summary_table(std::span<const AttackReport> reports, std::ostream& out);

}  // namespace blockrecon

#endif  // BLOCKRECON_REIDENT_HPP_
