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

#ifndef BLOCKRECON_WORKLOAD_HPP_
#define BLOCKRECON_WORKLOAD_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockrecon/model.hpp"

namespace blockrecon {

// Comparison sense attached to a published count. Lower-bound statistics stay
// exact at evaluation time; the sense only matters to whoever consumes them.
enum class Sense : uint8_t { kEq, kGe };

inline const char* sense_name(Sense s) { return s == Sense::kEq ? "EQ" : "GE"; }

enum class QueryScope : uint8_t { kAll, kSubsidized };

// What one matching household contributes to the count.
enum class QueryWeight : uint8_t { kHouseholds, kPersons, kChildren };

struct CountingQuery {
  std::string id;
  QueryScope scope = QueryScope::kAll;
  QueryWeight weight = QueryWeight::kHouseholds;
  Sense sense = Sense::kEq;
  std::function<bool(const HouseholdRecord&)> predicate;  // pure function of one record

  int64_t contribution(const HouseholdRecord& h) const {
    if (scope == QueryScope::kSubsidized && !h.subsidized) return 0;
    if (!predicate(h)) return 0;
    switch (weight) {
      case QueryWeight::kPersons: return h.size;
      case QueryWeight::kChildren: return h.children;
      default: return 1;
    }
  }
};

struct RaceGroups {
  int count = 8;
  int hispanic = 7;
};

// The fixed two-source query catalogue, parameterized only by the race group
// layout. Household-size counts cover sizes 1..6; everything above the top
// bin shows up as the residual against the household total.
std::vector<CountingQuery> standard_workload(const RaceGroups& groups);

// Query-id helpers shared by the mechanisms and attack layers.
std::string size_query_id(int size);
std::string race_query_id(int group);
inline constexpr const char* kQuerySize7Plus = "sf1_size_7p";
inline constexpr const char* kQueryPopulation = "sf1_population";
inline constexpr const char* kQueryChildren = "sf1_children";
inline constexpr const char* kQueryHudPopulation = "hud_population";
inline constexpr const char* kQueryHudHispanic = "hud_hispanic";
inline constexpr const char* kQueryHudChildren = "hud_children";
std::string hud_race_query_id(int group);
std::string hud_bedrooms_query_id(BedroomClass b);

// Published answers for one block.
struct BlockStatistics {
  struct Row {
    std::string query_id;
    int64_t answer = 0;
    Sense sense = Sense::kEq;
  };

  std::string block_id;
  int64_t n_total = 0;       // occupied units (household count)
  int64_t n_subsidized = 0;  // subsidized household count
  std::vector<Row> rows;

  const Row* find(std::string_view id) const;
  int64_t answer(std::string_view id) const;  // throws if the row is absent
  Row& upsert(std::string_view id, Sense sense);
  void validate() const;

  bool operator==(const BlockStatistics&) const = default;
};

// Exact evaluation of the workload against one block.
BlockStatistics evaluate_block(const Block& block, std::span<const CountingQuery> workload);

// One row per (block_id, query_id, answer, sense); the household and
// subsidized totals ride along as reserved query ids. `provenance` lines are
// emitted verbatim as header comments.
void save_statistics(std::span<const BlockStatistics> stats, std::ostream& out,
                     std::span<const std::string> provenance = {});
std::vector<BlockStatistics> load_statistics(std::istream& in);

}  // namespace blockrecon

#endif  // BLOCKRECON_WORKLOAD_HPP_
