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

#include "blockrecon/workload.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "blockrecon/textio.hpp"

namespace blockrecon {

namespace {

constexpr const char* kNTotalId = "sf1_households";
constexpr const char* kNSubsidizedId = "hud_households";

}  // namespace

std::string size_query_id(int size) { return "sf1_size_" + std::to_string(size); }
std::string race_query_id(int group) { return "sf1_race_" + std::to_string(group); }
std::string hud_race_query_id(int group) { return "hud_race_" + std::to_string(group); }
std::string hud_bedrooms_query_id(BedroomClass b) {
  return std::string("hud_bedrooms_") + bedroom_name(b);
}

std::vector<CountingQuery> standard_workload(const RaceGroups& groups) {
  if (groups.count < 1 || groups.count > 16 || groups.hispanic < 0 ||
      groups.hispanic >= groups.count) {
    throw std::invalid_argument("standard_workload: bad race group layout");
  }
  std::vector<CountingQuery> qs;

  // Whole-block statistics (census side).
  for (int size = 1; size <= 6; ++size) {
    qs.push_back({size_query_id(size), QueryScope::kAll, QueryWeight::kHouseholds, Sense::kEq,
                  [size](const HouseholdRecord& h) { return h.size == size; }});
  }
  qs.push_back({kQueryPopulation, QueryScope::kAll, QueryWeight::kPersons, Sense::kGe,
                [](const HouseholdRecord&) { return true; }});
  for (int g = 0; g < groups.count; ++g) {
    qs.push_back({race_query_id(g), QueryScope::kAll, QueryWeight::kHouseholds, Sense::kGe,
                  [g](const HouseholdRecord& h) { return h.has_flag(g); }});
  }
  qs.push_back({kQueryChildren, QueryScope::kAll, QueryWeight::kChildren, Sense::kGe,
                [](const HouseholdRecord&) { return true; }});

  // Subsidized-property statistics (housing agency side).
  qs.push_back({kQueryHudPopulation, QueryScope::kSubsidized, QueryWeight::kPersons, Sense::kGe,
                [](const HouseholdRecord&) { return true; }});
  for (int g = 0; g < groups.count; ++g) {
    if (g == groups.hispanic) continue;
    qs.push_back({hud_race_query_id(g), QueryScope::kSubsidized, QueryWeight::kHouseholds,
                  Sense::kGe, [g](const HouseholdRecord& h) { return h.has_flag(g); }});
  }
  {
    int hg = groups.hispanic;
    qs.push_back({kQueryHudHispanic, QueryScope::kSubsidized, QueryWeight::kHouseholds, Sense::kGe,
                  [hg](const HouseholdRecord& h) { return h.has_flag(hg); }});
  }
  qs.push_back({kQueryHudChildren, QueryScope::kSubsidized, QueryWeight::kHouseholds, Sense::kEq,
                [](const HouseholdRecord& h) { return h.has_children(); }});
  for (BedroomClass b : {BedroomClass::kLe1, BedroomClass::kEq2, BedroomClass::kGe3}) {
    qs.push_back({hud_bedrooms_query_id(b), QueryScope::kSubsidized, QueryWeight::kHouseholds,
                  Sense::kGe, [b](const HouseholdRecord& h) { return h.bedrooms == b; }});
  }
  return qs;
}

const BlockStatistics::Row* BlockStatistics::find(std::string_view id) const {
  for (const auto& r : rows) {
    if (r.query_id == id) return &r;
  }
  return nullptr;
}

int64_t BlockStatistics::answer(std::string_view id) const {
  const Row* r = find(id);
  if (r == nullptr) {
    throw std::out_of_range("statistics for block " + block_id + " have no row '" +
                            std::string(id) + "'");
  }
  return r->answer;
}

BlockStatistics::Row& BlockStatistics::upsert(std::string_view id, Sense sense) {
  for (auto& r : rows) {
    if (r.query_id == id) return r;
  }
  rows.push_back(Row{std::string(id), 0, sense});
  return rows.back();
}

void BlockStatistics::validate() const {
  if (n_total < 0 || n_subsidized < 0 || n_subsidized > n_total) {
    throw std::invalid_argument("statistics totals are inconsistent");
  }
  for (const auto& r : rows) {
    if (r.answer < 0) {
      throw std::invalid_argument("negative answer for query " + r.query_id);
    }
  }
}

BlockStatistics evaluate_block(const Block& block, std::span<const CountingQuery> workload) {
  BlockStatistics s;
  s.block_id = block.id;
  s.n_total = block.n_total();
  s.n_subsidized = block.n_subsidized();
  s.rows.reserve(workload.size());
  for (const auto& q : workload) {
    int64_t total = 0;
    for (const auto& h : block.households) total += q.contribution(h);
    s.rows.push_back({q.id, total, q.sense});
  }
  return s;
}

void save_statistics(std::span<const BlockStatistics> stats, std::ostream& out,
                     std::span<const std::string> provenance) {
  out << "# blockrecon statistics v1\n";
  for (const auto& p : provenance) out << "# " << p << '\n';
  out << "# block_id query_id answer sense\n";
  for (const auto& s : stats) {
    out << s.block_id << ' ' << kNTotalId << ' ' << s.n_total << " EQ\n";
    out << s.block_id << ' ' << kNSubsidizedId << ' ' << s.n_subsidized << " EQ\n";
    for (const auto& r : s.rows) {
      out << s.block_id << ' ' << r.query_id << ' ' << r.answer << ' ' << sense_name(r.sense)
          << '\n';
    }
  }
}

std::vector<BlockStatistics> load_statistics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# blockrecon statistics v1", 0) != 0) {
    throw std::runtime_error("statistics file: missing or unsupported schema header");
  }
  std::vector<BlockStatistics> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_fields(line);
    if (f.size() != 4) throw std::runtime_error("statistics file: malformed row");
    if (out.empty() || out.back().block_id != f[0]) {
      out.emplace_back();
      out.back().block_id = std::string(f[0]);
    }
    BlockStatistics& s = out.back();
    int64_t answer = parse_i64(f[2]);
    Sense sense = f[3] == "GE" ? Sense::kGe : Sense::kEq;
    if (f[3] != "GE" && f[3] != "EQ") {
      throw std::runtime_error("statistics file: unknown sense '" + std::string(f[3]) + "'");
    }
    if (f[1] == kNTotalId) {
      s.n_total = answer;
    } else if (f[1] == kNSubsidizedId) {
      s.n_subsidized = answer;
    } else {
      s.rows.push_back({std::string(f[1]), answer, sense});
    }
  }
  return out;
}

}  // namespace blockrecon
