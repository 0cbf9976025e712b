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

#include "blockrecon/reident.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "blockrecon/textio.hpp"

namespace blockrecon {

MatchKey MatchKey::build(const Universe& universe, const AttributeSet& attrs,
                         bool subsidized_only) {
  MatchKey key;
  key.attrs = attrs;
  key.subsidized_only = subsidized_only;
  for (size_t b = 0; b < universe.blocks.size(); ++b) {
    const Block& block = universe.blocks[b];
    for (size_t i = 0; i < block.households.size(); ++i) {
      const HouseholdRecord& h = block.households[i];
      if (subsidized_only && !h.subsidized) continue;
      key.records.push_back({HouseholdRef{static_cast<int32_t>(b), static_cast<int32_t>(i)},
                             attrs.project(h)});
    }
  }
  return key;
}

namespace {

RankedCandidates ranked_from_scores(std::map<std::vector<int64_t>, int64_t> scores,
                                    RankedCandidates::Provenance provenance) {
  RankedCandidates out;
  out.provenance = provenance;
  out.entries.reserve(scores.size());
  for (auto& [k, s] : scores) out.entries.push_back({k, s});
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const RankedCandidates::Entry& a, const RankedCandidates::Entry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.key < b.key;
                   });
  return out;
}

}  // namespace

RankedCandidates rank_from_reconstructions(std::span<const Reconstruction> recons,
                                           const ConfigurationSpace& space,
                                           const AttributeSet& attrs, const ViolationRule& rule) {
  if (recons.empty()) {
    throw std::invalid_argument("rank_from_reconstructions: need at least one reconstruction");
  }
  for (const auto& r : recons) {
    if (r.block_id != recons.front().block_id) {
      throw std::invalid_argument("rank_from_reconstructions: reconstructions span blocks");
    }
  }
  std::map<std::vector<int64_t>, int64_t> scores;
  for (const auto& r : recons) {
    for (const auto& [g, count] : r.violating) {
      (void)rule;
      scores[attrs.project(space.at(g))] += count;
    }
  }
  return ranked_from_scores(std::move(scores), RankedCandidates::Provenance::kReconstruction);
}

RankedCandidates sampling_baseline(const StateTables& sample, const AttributeSet& attrs) {
  std::map<std::vector<int64_t>, int64_t> scores;
  for (const auto& [h, count] : sample.violating_counts) {
    scores[attrs.project(h)] += count;
  }
  return ranked_from_scores(std::move(scores), RankedCandidates::Provenance::kSamplingBaseline);
}

std::vector<HouseholdRef> putative_violations(const RankedCandidates& ranking, const MatchKey& key,
                                              int k, std::span<const int32_t> flagged_blocks,
                                              bool uniques_only) {
  if (k < 1) throw std::invalid_argument("putative_violations: k must be >= 1");
  std::set<std::vector<int64_t>> top;
  for (size_t i = 0; i < ranking.entries.size() && i < static_cast<size_t>(k); ++i) {
    top.insert(ranking.entries[i].key);
  }
  std::set<int32_t> flagged(flagged_blocks.begin(), flagged_blocks.end());

  // Per-block multiplicity of each projection among covered households, for
  // the population-uniques restriction.
  std::map<std::pair<int32_t, std::vector<int64_t>>, int> multiplicity;
  if (uniques_only) {
    for (const auto& r : key.records) {
      ++multiplicity[{r.id.block, r.key}];
    }
  }

  std::vector<HouseholdRef> out;
  for (const auto& r : key.records) {
    if (!flagged.contains(r.id.block)) continue;
    if (!top.contains(r.key)) continue;
    if (uniques_only && multiplicity[{r.id.block, r.key}] != 1) continue;
    out.push_back(r.id);
  }
  return out;
}

std::vector<HouseholdRef> true_violations(const Universe& universe, const ViolationRule& rule) {
  std::vector<HouseholdRef> out;
  for (size_t b = 0; b < universe.blocks.size(); ++b) {
    const Block& block = universe.blocks[b];
    for (size_t i = 0; i < block.households.size(); ++i) {
      if (rule.violates(block.households[i])) {
        out.push_back({static_cast<int32_t>(b), static_cast<int32_t>(i)});
      }
    }
  }
  return out;
}

std::vector<int32_t> violating_blocks(const Universe& universe, const ViolationRule& rule) {
  std::vector<int32_t> out;
  for (size_t b = 0; b < universe.blocks.size(); ++b) {
    for (const auto& h : universe.blocks[b].households) {
      if (rule.violates(h)) {
        out.push_back(static_cast<int32_t>(b));
        break;
      }
    }
  }
  return out;
}

ScoreResult score(std::span<const HouseholdRef> putative, std::span<const HouseholdRef> truth,
                  const RankedCandidates& ranking, int k, const MatchKey& key) {
  ScoreResult r;
  std::set<HouseholdRef> truth_set(truth.begin(), truth.end());
  for (const auto& id : putative) {
    if (truth_set.contains(id)) ++r.true_positives;
  }
  if (!putative.empty()) {
    r.precision = static_cast<double>(r.true_positives) / static_cast<double>(putative.size());
  }
  if (!truth.empty()) {
    r.recall = static_cast<double>(r.true_positives) / static_cast<double>(truth.size());
  }
  // Match rate over the top-k ranked configurations.
  std::set<std::vector<int64_t>> violating_keys;
  for (const auto& rec : key.records) {
    if (truth_set.contains(rec.id)) violating_keys.insert(rec.key);
  }
  size_t considered = std::min(ranking.entries.size(), static_cast<size_t>(k));
  if (considered > 0) {
    int64_t hits = 0;
    for (size_t i = 0; i < considered; ++i) {
      if (violating_keys.contains(ranking.entries[i].key)) ++hits;
    }
    r.match_rate = static_cast<double>(hits) / static_cast<double>(considered);
  }
  return r;
}

BlockMetrics block_metrics(std::span<const int32_t> flagged_blocks, const Universe& truth,
                           const ViolationRule& rule) {
  BlockMetrics m;
  std::vector<int32_t> violating = violating_blocks(truth, rule);
  std::set<int32_t> violating_set(violating.begin(), violating.end());
  m.true_violating = static_cast<int64_t>(violating.size());
  m.flagged = static_cast<int64_t>(flagged_blocks.size());
  for (int32_t b : flagged_blocks) {
    if (violating_set.contains(b)) ++m.flagged_true;
  }
  if (m.flagged > 0) {
    m.precision = static_cast<double>(m.flagged_true) / static_cast<double>(m.flagged);
  }
  if (m.true_violating > 0) {
    m.recall = static_cast<double>(m.flagged_true) / static_cast<double>(m.true_violating);
  }
  return m;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : "na";
}

std::optional<double> parse_opt(std::string_view s) {
  if (s == "na") return std::nullopt;
  return parse_f64(s);
}

std::string curve_metric(const std::string& base, const Curve& c) {
  return base + ":" + c.key_label + (c.uniques_only ? ":uniques" : ":all");
}

}  // namespace

void AttackReport::save_metrics(std::ostream& out) const {
  out << "# blockrecon metrics v1\n";
  out << "# scenario k metric value\n";
  auto row = [&](int64_t k, const std::string& metric, const std::string& value) {
    out << scenario << ' ' << k << ' ' << metric << ' ' << value << '\n';
  };
  row(0, "true_violating_blocks", std::to_string(true_violating_blocks));
  row(0, "flagged_blocks", std::to_string(flagged_blocks));
  row(0, "flagged_true", std::to_string(flagged_true));
  row(0, "undetermined_blocks", std::to_string(undetermined_blocks));
  row(0, "unreconstructable_blocks", std::to_string(unreconstructable_blocks));
  row(0, "block_precision", opt_str(block_precision));
  row(0, "block_recall", opt_str(block_recall));
  row(0, "true_violating_households", std::to_string(true_violating_households));
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      row(p.k, curve_metric("vhat", c), std::to_string(p.v_hat));
      row(p.k, curve_metric("true_positives", c), std::to_string(p.true_positives));
      row(p.k, curve_metric("precision", c), opt_str(p.precision));
      row(p.k, curve_metric("recall", c), opt_str(p.recall));
      row(p.k, curve_metric("match_rate", c), opt_str(p.match_rate));
    }
  }
  for (const auto& [label, values] : solvar_normalized) {
    for (size_t i = 0; i < values.size(); ++i) {
      row(static_cast<int64_t>(i), "solvar:" + label, format_double(values[i]));
    }
  }
  for (size_t i = 0; i < violation_scatter.size(); ++i) {
    row(static_cast<int64_t>(i), "scatter_true", std::to_string(violation_scatter[i].first));
    row(static_cast<int64_t>(i), "scatter_putative", std::to_string(violation_scatter[i].second));
  }
}

AttackReport AttackReport::load_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# blockrecon metrics v1", 0) != 0) {
    throw std::runtime_error("metrics file: missing or unsupported schema header");
  }
  AttackReport rep;
  std::map<std::pair<std::string, bool>, Curve> curves;
  auto curve_for = [&](const std::string& label, bool uniq) -> Curve& {
    auto& c = curves[{label, uniq}];
    c.key_label = label;
    c.uniques_only = uniq;
    return c;
  };
  auto point_for = [&](Curve& c, int k) -> CurvePoint& {
    for (auto& p : c.points) {
      if (p.k == k) return p;
    }
    CurvePoint fresh;
    fresh.k = k;
    c.points.push_back(fresh);
    return c.points.back();
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 4) throw std::runtime_error("metrics file: malformed row");
    rep.scenario = std::string(f[0]);
    int64_t k = parse_i64(f[1]);
    std::string metric(f[2]);
    std::string value(f[3]);
    if (metric == "true_violating_blocks") {
      rep.true_violating_blocks = parse_i64(value);
    } else if (metric == "flagged_blocks") {
      rep.flagged_blocks = parse_i64(value);
    } else if (metric == "flagged_true") {
      rep.flagged_true = parse_i64(value);
    } else if (metric == "undetermined_blocks") {
      rep.undetermined_blocks = parse_i64(value);
    } else if (metric == "unreconstructable_blocks") {
      rep.unreconstructable_blocks = parse_i64(value);
    } else if (metric == "block_precision") {
      rep.block_precision = parse_opt(value);
    } else if (metric == "block_recall") {
      rep.block_recall = parse_opt(value);
    } else if (metric == "true_violating_households") {
      rep.true_violating_households = parse_i64(value);
    } else if (metric == "scatter_true") {
      if (rep.violation_scatter.size() <= static_cast<size_t>(k)) {
        rep.violation_scatter.resize(static_cast<size_t>(k) + 1);
      }
      rep.violation_scatter[static_cast<size_t>(k)].first = parse_i64(value);
    } else if (metric == "scatter_putative") {
      if (rep.violation_scatter.size() <= static_cast<size_t>(k)) {
        rep.violation_scatter.resize(static_cast<size_t>(k) + 1);
      }
      rep.violation_scatter[static_cast<size_t>(k)].second = parse_i64(value);
    } else if (metric.rfind("solvar:", 0) == 0) {
      auto& values = rep.solvar_normalized[metric.substr(7)];
      if (values.size() <= static_cast<size_t>(k)) values.resize(static_cast<size_t>(k) + 1);
      values[static_cast<size_t>(k)] = parse_f64(value);
    } else {
      // curve rows: <base>:<key>:<all|uniques>
      size_t p1 = metric.find(':');
      size_t p2 = metric.rfind(':');
      if (p1 == std::string::npos || p2 == p1) {
        throw std::runtime_error("metrics file: unknown metric '" + metric + "'");
      }
      std::string base = metric.substr(0, p1);
      std::string label = metric.substr(p1 + 1, p2 - p1 - 1);
      bool uniq = metric.substr(p2 + 1) == "uniques";
      Curve& c = curve_for(label, uniq);
      CurvePoint& pt = point_for(c, static_cast<int>(k));
      if (base == "vhat") {
        pt.v_hat = parse_i64(value);
      } else if (base == "true_positives") {
        pt.true_positives = parse_i64(value);
      } else if (base == "precision") {
        pt.precision = parse_opt(value);
      } else if (base == "recall") {
        pt.recall = parse_opt(value);
      } else if (base == "match_rate") {
        pt.match_rate = parse_opt(value);
      } else {
        throw std::runtime_error("metrics file: unknown curve metric '" + metric + "'");
      }
    }
  }
  for (auto& [k, c] : curves) {
    std::sort(c.points.begin(), c.points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.k < b.k; });
    rep.curves.push_back(std::move(c));
  }
  return rep;
}

void save_summary_table(std::span<const AttackReport> reports, std::ostream& out) {
  auto cell = [](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("na");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return std::string(buf);
  };
  out << "metric";
  for (const auto& r : reports) out << '\t' << r.scenario;
  out << '\n';
  out << "true_violating_blocks";
  for (const auto& r : reports) out << '\t' << r.true_violating_blocks;
  out << '\n';
  out << "violating_blocks_detected";
  for (const auto& r : reports) out << '\t' << r.flagged_blocks;
  out << '\n';
  out << "block_precision";
  for (const auto& r : reports) out << '\t' << cell(r.block_precision);
  out << '\n';
  out << "block_recall";
  for (const auto& r : reports) out << '\t' << cell(r.block_recall);
  out << '\n';
  out << "unreconstructable_blocks";
  for (const auto& r : reports) out << '\t' << r.unreconstructable_blocks;
  out << '\n';
}

}  // namespace blockrecon
