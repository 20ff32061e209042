#include "minsig/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace minsig {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_root_marker(const std::string& parent) { return parent.empty() || parent == "-"; }

}  // namespace

std::optional<UnitId> SpIndex::find(std::string_view name) const {
  const auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

UnitId SpIndex::at(std::string_view name) const {
  if (auto u = find(name)) return *u;
  fail(ErrorCode::unknown_unit, "unknown spatial unit '" + std::string(name) + "'");
}

UnitId SpIndex::ancestor(UnitId u, int level) const {
  int l = levels_.at(u);
  if (level > l || level < 0)
    fail(ErrorCode::invalid_argument, "ancestor level out of range");
  while (l > level) {
    u = parents_[u];
    --l;
  }
  return u;
}

void SpIndex::set_grid_side(std::uint32_t side) {
  if (static_cast<std::size_t>(side) * side != base_units_.size())
    fail(ErrorCode::malformed_hierarchy, "grid side does not match base unit count");
  grid_side_ = side;
}

std::pair<std::uint32_t, std::uint32_t> SpIndex::grid_xy(UnitId base) const {
  if (!grid_side_) fail(ErrorCode::invalid_argument, "hierarchy has no grid geometry");
  const auto p = base_position(base);
  return {p % *grid_side_, p / *grid_side_};
}

SpIndex load_sp_index(std::span<const HierarchyEdge> edges, std::string tid) {
  constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::string> names;
  std::vector<std::uint32_t> parent;
  std::vector<std::vector<std::uint32_t>> kids;
  auto intern = [&](const std::string& n) {
    auto [it, inserted] = ids.emplace(n, static_cast<std::uint32_t>(names.size()));
    if (inserted) {
      names.push_back(n);
      parent.push_back(none);
      kids.emplace_back();
    }
    return it->second;
  };

  for (const auto& e : edges) {
    if (e.child.empty()) fail(ErrorCode::malformed_hierarchy, "empty unit id");
    const auto c = intern(e.child);
    if (is_root_marker(e.parent)) continue;
    const auto p = intern(e.parent);
    if (p == c) fail(ErrorCode::malformed_hierarchy, "cycle detected at '" + e.child + "'");
    if (parent[c] == p) continue;
    if (parent[c] != none)
      fail(ErrorCode::malformed_hierarchy, "unit '" + e.child + "' has two parents");
    parent[c] = p;
    kids[p].push_back(c);
  }
  if (names.empty()) fail(ErrorCode::malformed_hierarchy, "empty hierarchy");

  std::vector<std::uint32_t> roots;
  for (std::uint32_t i = 0; i < names.size(); ++i)
    if (parent[i] == none) roots.push_back(i);
  if (roots.empty()) fail(ErrorCode::malformed_hierarchy, "cycle detected: no root unit");
  if (roots.size() > 1)
    fail(ErrorCode::malformed_hierarchy,
         "forest: " + std::to_string(roots.size()) + " root units ('" + names[roots[0]] +
             "', '" + names[roots[1]] + "', ...)");

  // Preorder renumbering; unreachable units can only sit on a cycle.
  SpIndex idx;
  idx.tid_ = std::move(tid);
  std::vector<std::uint32_t> order;
  std::vector<int> depth(names.size(), -1);
  std::vector<std::uint32_t> stack{roots[0]};
  depth[roots[0]] = 0;
  while (!stack.empty()) {
    const auto n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto it = kids[n].rbegin(); it != kids[n].rend(); ++it) {
      depth[*it] = depth[n] + 1;
      stack.push_back(*it);
    }
  }
  if (order.size() != names.size()) {
    for (std::uint32_t i = 0; i < names.size(); ++i)
      if (depth[i] < 0)
        fail(ErrorCode::malformed_hierarchy, "cycle detected at '" + names[i] + "'");
  }

  int leaf_depth = -1;
  for (auto n : order) {
    if (!kids[n].empty()) continue;
    if (leaf_depth < 0) leaf_depth = depth[n];
    if (depth[n] != leaf_depth)
      fail(ErrorCode::malformed_hierarchy, "ragged leaf depth: '" + names[n] + "' at depth " +
                                               std::to_string(depth[n]) + ", expected " +
                                               std::to_string(leaf_depth));
  }
  if (leaf_depth < 1) fail(ErrorCode::malformed_hierarchy, "hierarchy has no units below the root");

  std::vector<UnitId> new_id(names.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) new_id[order[i]] = i;

  const auto n_units = order.size();
  idx.height_ = leaf_depth;
  idx.names_.resize(n_units);
  idx.levels_.resize(n_units);
  idx.parents_.resize(n_units);
  idx.children_.resize(n_units);
  idx.ranges_.resize(n_units);
  idx.base_pos_.assign(n_units, none);
  idx.by_level_.resize(static_cast<std::size_t>(leaf_depth) + 1);
  for (std::uint32_t i = 0; i < n_units; ++i) {
    const auto old = order[i];
    idx.names_[i] = names[old];
    idx.levels_[i] = depth[old];
    idx.parents_[i] = parent[old] == none ? i : new_id[parent[old]];
    for (auto k : kids[old]) idx.children_[i].push_back(new_id[k]);
    idx.by_level_[static_cast<std::size_t>(depth[old])].push_back(i);
    idx.lookup_.emplace(names[old], i);
    if (kids[old].empty()) {
      idx.base_pos_[i] = static_cast<std::uint32_t>(idx.base_units_.size());
      idx.base_units_.push_back(i);
    }
  }
  // Base ranges bottom-up: preorder guarantees children follow parents.
  for (std::uint32_t i = n_units; i-- > 0;) {
    if (idx.children_[i].empty()) {
      idx.ranges_[i] = {idx.base_pos_[i], idx.base_pos_[i] + 1};
    } else {
      idx.ranges_[i] = {idx.ranges_[idx.children_[i].front()].begin,
                        idx.ranges_[idx.children_[i].back()].end};
    }
  }
  return idx;
}

void GridHierarchyConfig::validate() const {
  if (base_side == 0 || side_length == 0 || side_length % base_side != 0)
    fail(ErrorCode::invalid_argument, "grid side length must be a positive multiple of the base side");
  if (levels < 1) fail(ErrorCode::invalid_argument, "hierarchy needs at least one level");
  if (!std::isfinite(width_exponent) || !std::isfinite(density_exponent))
    fail(ErrorCode::invalid_argument, "hierarchy exponents must be finite");
}

std::vector<std::uint32_t> level_widths(const GridHierarchyConfig& config) {
  config.validate();
  const double n = config.base_count();
  const int m = config.levels;
  const double q = n / std::pow(static_cast<double>(m), config.width_exponent);
  std::vector<std::uint32_t> widths(static_cast<std::size_t>(m));
  for (int l = 1; l <= m; ++l) {
    const double w = q * std::pow(static_cast<double>(l), config.width_exponent);
    widths[static_cast<std::size_t>(l - 1)] =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::llround(w)));
  }
  widths.back() = static_cast<std::uint32_t>(n);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    if (widths[l] > widths[l + 1])
      fail(ErrorCode::infeasible, "level " + std::to_string(l + 1) + " is wider than level " +
                                      std::to_string(l + 2) + " after rounding");
  return widths;
}

std::vector<std::uint32_t> level_unit_sizes(const GridHierarchyConfig& config, int level) {
  const auto widths = level_widths(config);
  if (level < 1 || level > config.levels) fail(ErrorCode::invalid_argument, "level out of range");
  const std::uint32_t n = config.base_count();
  const std::uint32_t w = widths[static_cast<std::size_t>(level - 1)];
  if (level == config.levels) return std::vector<std::uint32_t>(n, 1);

  std::vector<double> quota(w);
  double total = 0;
  for (std::uint32_t i = 0; i < w; ++i) {
    quota[i] = std::pow(static_cast<double>(i + 1), config.density_exponent);
    total += quota[i];
  }
  std::vector<std::uint32_t> sizes(w);
  std::int64_t assigned = 0;
  for (std::uint32_t i = 0; i < w; ++i) {
    quota[i] = quota[i] / total * n;
    sizes[i] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::floor(quota[i])));
    assigned += sizes[i];
  }
  std::vector<std::uint32_t> order(w);
  std::iota(order.begin(), order.end(), 0u);
  if (assigned < n) {
    // Largest remainder; ties go to the earlier unit.
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % w, ++assigned) ++sizes[order[k]];
  } else {
    while (assigned > n) {
      const auto big = std::max_element(sizes.begin(), sizes.end());
      --*big;
      --assigned;
    }
  }
  return sizes;
}

namespace {

std::vector<std::uint32_t> cuts_from_sizes(const std::vector<std::uint32_t>& sizes) {
  std::vector<std::uint32_t> cuts;
  std::uint32_t pos = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    pos += sizes[i];
    cuts.push_back(pos);
  }
  return cuts;
}

// Snaps the desired finer cuts onto the coarser ones so the finer level nests,
// then restores the requested unit count by halving the largest segments.
std::vector<std::uint32_t> nest_cuts(const std::vector<std::uint32_t>& coarse,
                                     std::vector<std::uint32_t> desired, std::uint32_t n) {
  const std::size_t want = desired.size();
  std::vector<bool> used(desired.size(), false);
  for (auto c : coarse) {
    std::size_t best = desired.size();
    std::uint32_t best_dist = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t j = 0; j < desired.size(); ++j) {
      if (used[j]) continue;
      const auto d = desired[j] > c ? desired[j] - c : c - desired[j];
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    if (best < desired.size()) {
      used[best] = true;
      desired[best] = c;
    }
  }
  std::set<std::uint32_t> cut_set(desired.begin(), desired.end());
  cut_set.insert(coarse.begin(), coarse.end());
  while (cut_set.size() < want) {
    std::uint32_t prev = 0, best_begin = 0, best_len = 0;
    auto consider = [&](std::uint32_t next) {
      if (next - prev > best_len) {
        best_len = next - prev;
        best_begin = prev;
      }
      prev = next;
    };
    for (auto c : cut_set) consider(c);
    consider(n);
    if (best_len < 2) fail(ErrorCode::infeasible, "cannot split grid into the requested width");
    cut_set.insert(best_begin + best_len / 2);
  }
  return {cut_set.begin(), cut_set.end()};
}

}  // namespace

SpIndex generate_grid_hierarchy(const GridHierarchyConfig& config, std::uint64_t /*seed*/) {
  const auto widths = level_widths(config);
  const std::uint32_t side = config.cells_per_side();
  const std::uint32_t n = side * side;
  const int m = config.levels;

  // cuts[l] partitions the row-major traversal [0, n) for level l+1.
  std::vector<std::vector<std::uint32_t>> cuts(static_cast<std::size_t>(m));
  for (int l = 1; l < m; ++l) {
    auto desired = cuts_from_sizes(level_unit_sizes(config, l));
    cuts[static_cast<std::size_t>(l - 1)] =
        l == 1 ? desired : nest_cuts(cuts[static_cast<std::size_t>(l - 2)], desired, n);
  }

  auto segment_of = [&](int level, std::uint32_t pos) {
    const auto& c = cuts[static_cast<std::size_t>(level - 1)];
    return static_cast<std::uint32_t>(std::upper_bound(c.begin(), c.end(), pos) - c.begin());
  };
  auto unit_name = [&](int level, std::uint32_t pos) {
    if (level == m) return "c" + std::to_string(pos % side) + "_" + std::to_string(pos / side);
    return "U" + std::to_string(level) + "." + std::to_string(segment_of(level, pos) + 1);
  };

  std::vector<HierarchyEdge> edges;
  edges.push_back({"root", ""});
  for (int l = 1; l <= m; ++l) {
    std::string last;
    for (std::uint32_t pos = 0; pos < n; ++pos) {
      auto child = unit_name(l, pos);
      if (child == last) continue;
      last = child;
      edges.push_back({child, l == 1 ? std::string("root") : unit_name(l - 1, pos)});
    }
  }
  auto idx = load_sp_index(edges, "grid");
  idx.set_grid_side(side);
  return idx;
}

std::vector<UnitId> base_descendants(const SpIndex& index, UnitId unit) {
  if (unit >= index.unit_count()) fail(ErrorCode::unknown_unit, "unknown unit id");
  const auto r = index.base_range(unit);
  std::vector<UnitId> out;
  out.reserve(r.size());
  for (auto p = r.begin; p < r.end; ++p) out.push_back(index.base_unit(p));
  return out;
}

std::vector<UnitId> base_descendants(const SpIndex& index, std::string_view unit) {
  return base_descendants(index, index.at(unit));
}

SpIndex read_hierarchy_csv(std::istream& in) {
  std::vector<HierarchyEdge> edges;
  std::string tid = "default";
  std::optional<std::uint32_t> grid;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto body = trim(std::string_view(t).substr(1));
      if (body.rfind("tid=", 0) == 0) tid = trim(std::string_view(body).substr(4));
      if (body.rfind("grid=", 0) == 0) {
        try {
          grid = static_cast<std::uint32_t>(std::stoul(body.substr(5)));
        } catch (const std::exception&) {
          fail(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": bad grid header");
        }
      }
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string::npos)
      fail(ErrorCode::parse_error,
           "line " + std::to_string(line_no) + ": expected 'child_id,parent_id'");
    HierarchyEdge e{trim(std::string_view(t).substr(0, comma)),
                    trim(std::string_view(t).substr(comma + 1))};
    if (e.parent == "-") e.parent.clear();
    if (e.child.empty())
      fail(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": empty child id");
    edges.push_back(std::move(e));
  }
  auto idx = load_sp_index(edges, tid);
  if (grid) idx.set_grid_side(*grid);
  return idx;
}

SpIndex read_hierarchy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open hierarchy file '" + path + "'");
  return read_hierarchy_csv(in);
}

void write_hierarchy_csv(const SpIndex& index, std::ostream& out) {
  out << "# tid=" << index.tid() << '\n';
  if (auto g = index.grid_side()) out << "# grid=" << *g << '\n';
  out << index.name(index.root()) << ",-\n";
  for (UnitId u = 1; u < index.unit_count(); ++u)
    out << index.name(u) << ',' << index.name(index.parent(u)) << '\n';
}

}  // namespace minsig
