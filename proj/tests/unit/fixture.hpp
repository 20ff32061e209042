#pragma once

// Shared fixtures: the four-entity, two-level toy corpus with its fixed hash
// table, and small synthetic corpora.

#include <string>
#include <utility>
#include <vector>

#include "minsig/bench.hpp"

namespace fixture {

using namespace minsig;

// Root -> {L5, L6}; L5 -> {L1, L2}; L6 -> {L3, L4}.
inline SpIndex toy_index() {
  const std::vector<HierarchyEdge> edges{{"root", ""},   {"L5", "root"}, {"L6", "root"}, {"L1", "L5"},
                                         {"L2", "L5"},   {"L3", "L6"},   {"L4", "L6"}};
  return load_sp_index(edges, "toy");
}

inline STCell cell(const SpIndex& index, TimeIndex t, const char* unit) { return {t, index.at(unit)}; }

// Two hash functions over the eight base cells at times 1 and 2.
inline HashFamily toy_family(const SpIndex& index) {
  const char* units[] = {"L1", "L2", "L3", "L4"};
  const HashValue h1[2][4] = {{2, 5, 4, 7}, {8, 1, 6, 3}};  // [time-1][unit]
  const HashValue h2[2][4] = {{8, 6, 4, 2}, {3, 5, 1, 7}};
  std::vector<std::pair<STCell, std::vector<HashValue>>> table;
  for (TimeIndex t = 1; t <= 2; ++t)
    for (int u = 0; u < 4; ++u) table.push_back({cell(index, t, units[u]), {h1[t - 1][u], h2[t - 1][u]}});
  return HashFamily::from_table(index, table);
}

// Entities a, b, c, d in that id order.
inline std::vector<CellSequence> toy_sequences(const SpIndex& index) {
  const std::vector<std::vector<STCell>> base{
      {cell(index, 1, "L2"), cell(index, 2, "L1")},
      {cell(index, 1, "L1"), cell(index, 2, "L2")},
      {cell(index, 1, "L3"), cell(index, 2, "L1")},
      // Listed in the worked example with T1 L4 as well, but h2(T1 L4) = 2
      // contradicts d's level-2 signature <3,7>; only T2 L4 fits the table.
      {cell(index, 2, "L4")},
  };
  std::vector<CellSequence> out;
  for (const auto& b : base) out.push_back(lift_sequence(b, index));
  return out;
}

// 0.1 * Dice(level 1) + 0.9 * Dice(level 2).
inline Measure toy_measure() {
  MeasureParams p;
  p.variant = MeasureVariant::dice;
  p.level_weights = {0.1, 0.9};
  return Measure(p, 2);
}

inline Corpus small_corpus(std::size_t entities, std::uint64_t seed, std::uint32_t side = 8, int levels = 3,
                           std::uint32_t duration = 12) {
  SyntheticConfig sc;
  sc.grid.side_length = side;
  sc.grid.levels = levels;
  sc.generator.entities = entities;
  sc.generator.params.duration = duration;
  sc.generator.seed = seed;
  return synthesize_corpus(sc);
}

inline std::vector<double> degrees_of(const std::vector<RankedEntity>& ranked) {
  std::vector<double> out;
  for (const auto& r : ranked) out.push_back(r.degree);
  return out;
}

}  // namespace fixture
