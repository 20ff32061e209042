#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "minsig/common.hpp"
#include "minsig/hierarchy.hpp"

namespace minsig {

/// One raw presence record as read from a trace file. Times are epoch seconds.
struct RawRecord {
  std::string entity;
  std::string location;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::size_t line = 0;  // source line, 0 when synthetic
};

/// A presence instance: an entity at the unit ending `path` over [start, end)
/// in base temporal units. `path` runs from level 1 down to the unit.
struct PresenceInstance {
  std::string entity;
  std::string tid;
  int level = 0;
  std::vector<UnitId> path;
  TimeIndex start = 0;
  TimeIndex end = 0;
};

/// Digital trace reduced to its base ST-cells (sorted, unique).
struct DigitalTrace {
  std::string entity;
  std::vector<STCell> cells;
};

/// Per-level ST-cell sets; `level(l)` holds seq^l for l in [1, m] as sorted
/// cell keys (STCell::key), i.e. time-major order.
class CellSequence {
 public:
  CellSequence() = default;
  explicit CellSequence(int m) : sets_(static_cast<std::size_t>(m)) {}

  int height() const noexcept { return static_cast<int>(sets_.size()); }
  std::span<const std::uint64_t> level(int l) const {
    const auto& s = sets_.at(static_cast<std::size_t>(l - 1));
    return {s.data(), s.size()};
  }
  std::vector<std::uint64_t>& mutable_level(int l) { return sets_.at(static_cast<std::size_t>(l - 1)); }
  std::span<const std::uint64_t> base() const { return level(height()); }
  bool empty() const { return sets_.empty() || sets_.back().empty(); }
  std::size_t total_cells() const;

  friend bool operator==(const CellSequence&, const CellSequence&) = default;

 private:
  std::vector<std::vector<std::uint64_t>> sets_;
};

/// Adjoint presence instance: the deepest common unit of two co-present
/// entities over a maximal contiguous run of shared temporal units.
struct AjPI {
  std::string tid;
  int level = 0;
  std::vector<UnitId> path;  // common ancestors, level 1 .. level
  TimeIndex start = 0;
  TimeIndex end = 0;  // exclusive

  TimeIndex duration() const noexcept { return end - start; }
  friend bool operator==(const AjPI&, const AjPI&) = default;
};

/// Temporal unit index of an epoch-second timestamp.
TimeIndex to_time_index(std::int64_t seconds, std::int64_t unit_seconds);

/// Base cells covered by a record: every temporal unit intersecting
/// [start, end); a zero-length record yields its containing unit.
std::vector<STCell> record_cells(const RawRecord& record, UnitId base, std::int64_t unit_seconds);

/// Groups records by entity and converts them into base ST-cells.
/// Errors: unknown or non-base location, end < start.
std::map<std::string, DigitalTrace> discretize_trace(std::span<const RawRecord> raw,
                                                     const SpIndex& index,
                                                     std::int64_t unit_seconds);

/// seq^m = base cells; seq^i = parents of seq^{i+1} at the same time.
CellSequence lift_sequence(std::span<const STCell> base_cells, const SpIndex& index);
CellSequence lift_sequence(std::span<const std::uint64_t> base_keys, const SpIndex& index);

/// Root-to-unit path (levels 1 .. level(unit)).
std::vector<UnitId> unit_path(const SpIndex& index, UnitId unit);

/// Maximal AjPIs of two entities. Pairs that only share the virtual root are
/// not co-present at any measurable level and yield nothing.
std::vector<AjPI> ajpis(const CellSequence& a, const CellSequence& b, const SpIndex& index);
/// Same, checking that both traces belong to the index's tid.
std::vector<AjPI> ajpis(const CellSequence& a, const std::string& tid_a, const CellSequence& b,
                        const std::string& tid_b, const SpIndex& index);

/// Size of the sorted-key intersection.
std::size_t intersection_size(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

}  // namespace minsig
