#pragma once

// Spatial hierarchy (sp-index): a fixed tree of spatial units. The tree has a
// virtual root at level 0; measurable levels run 1 (coarsest) .. m (base).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "minsig/common.hpp"

namespace minsig {

struct HierarchyEdge {
  std::string child;
  std::string parent;  // empty for the root row
};

/// Base-unit positions [begin, end) in depth-first order; every unit's base
/// descendants are contiguous in that order.
struct BaseRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t size() const noexcept { return end - begin; }
};

class SpIndex {
 public:
  SpIndex() = default;

  const std::string& tid() const noexcept { return tid_; }
  /// Number of measurable levels m (the virtual root is not counted).
  int height() const noexcept { return height_; }
  UnitId root() const noexcept { return 0; }
  std::size_t unit_count() const noexcept { return names_.size(); }

  int level(UnitId u) const { return levels_.at(u); }
  UnitId parent(UnitId u) const { return parents_.at(u); }
  std::span<const UnitId> children(UnitId u) const {
    const auto& c = children_.at(u);
    return {c.data(), c.size()};
  }
  const std::string& name(UnitId u) const { return names_.at(u); }
  std::optional<UnitId> find(std::string_view name) const;
  /// Throws unknown_unit.
  UnitId at(std::string_view name) const;

  bool is_base(UnitId u) const { return levels_.at(u) == height_; }
  std::size_t base_count() const noexcept { return base_units_.size(); }
  std::uint32_t base_position(UnitId base) const { return base_pos_.at(base); }
  UnitId base_unit(std::uint32_t position) const { return base_units_.at(position); }
  BaseRange base_range(UnitId u) const { return ranges_.at(u); }
  std::span<const UnitId> units_at_level(int level) const {
    const auto& v = by_level_.at(static_cast<std::size_t>(level));
    return {v.data(), v.size()};
  }
  /// Ancestor of `u` at `level` (level <= level(u)).
  UnitId ancestor(UnitId u, int level) const;

  /// Side length in cells when the base units form a row-major square grid.
  std::optional<std::uint32_t> grid_side() const noexcept { return grid_side_; }
  void set_grid_side(std::uint32_t side);
  /// Grid coordinates of a base unit (requires grid_side()).
  std::pair<std::uint32_t, std::uint32_t> grid_xy(UnitId base) const;

  friend SpIndex load_sp_index(std::span<const HierarchyEdge> edges, std::string tid);

 private:
  std::string tid_;
  int height_ = 0;
  std::vector<std::string> names_;
  std::vector<int> levels_;
  std::vector<UnitId> parents_;
  std::vector<std::vector<UnitId>> children_;
  std::vector<BaseRange> ranges_;
  std::vector<std::vector<UnitId>> by_level_;
  std::vector<UnitId> base_units_;
  std::vector<std::uint32_t> base_pos_;  // indexed by UnitId; only valid for base units
  std::unordered_map<std::string, UnitId> lookup_;
  std::optional<std::uint32_t> grid_side_;
};

/// Builds an SpIndex from (child, parent) edges. Exactly one unit may lack a
/// parent (the root row, or a unit that only ever appears as a parent); it
/// becomes the virtual level-0 root.
/// Errors: cycle, forest, ragged leaf depth, duplicate parent.
SpIndex load_sp_index(std::span<const HierarchyEdge> edges, std::string tid);

struct GridHierarchyConfig {
  std::uint32_t side_length = 16;  // L
  std::uint32_t base_side = 1;     // L_bsu
  int levels = 4;                  // m
  double width_exponent = 2.0;     // a
  double density_exponent = 2.0;   // b

  std::uint32_t cells_per_side() const { return side_length / base_side; }
  std::uint32_t base_count() const { return cells_per_side() * cells_per_side(); }
  void validate() const;
};

/// Number of units per level, W_l = round(Q * l^a) with Q = n / m^a, l = 1..m.
std::vector<std::uint32_t> level_widths(const GridHierarchyConfig& config);
/// Target unit sizes at `level` (in base cells) following D_l^i = W_l R i^b,
/// rounded by largest remainder so they sum to the base count, each >= 1.
std::vector<std::uint32_t> level_unit_sizes(const GridHierarchyConfig& config, int level);

/// Grid hierarchy over a row-major traversal of the base cells. `seed` is
/// accepted for interface stability; the construction is fully determined by
/// the config.
SpIndex generate_grid_hierarchy(const GridHierarchyConfig& config, std::uint64_t seed = 0);

/// All level-m descendants of `unit` (a base unit returns itself).
std::vector<UnitId> base_descendants(const SpIndex& index, UnitId unit);
std::vector<UnitId> base_descendants(const SpIndex& index, std::string_view unit);

/// Hierarchy CSV: `# tid=<id>` header, optional `# grid=<side>`, one
/// `child,parent` edge per line, root row `root,-`.
SpIndex read_hierarchy_csv(std::istream& in);
SpIndex read_hierarchy_file(const std::string& path);
void write_hierarchy_csv(const SpIndex& index, std::ostream& out);

}  // namespace minsig
