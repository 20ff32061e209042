#include "minsig/traces.hpp"

#include <algorithm>
#include <limits>

namespace minsig {

std::size_t CellSequence::total_cells() const {
  std::size_t n = 0;
  for (const auto& s : sets_) n += s.size();
  return n;
}

TimeIndex to_time_index(std::int64_t seconds, std::int64_t unit_seconds) {
  if (unit_seconds <= 0) fail(ErrorCode::invalid_argument, "temporal unit must be positive");
  if (seconds < 0) fail(ErrorCode::invalid_argument, "negative timestamp");
  const auto t = seconds / unit_seconds;
  if (t > std::numeric_limits<TimeIndex>::max())
    fail(ErrorCode::invalid_argument, "timestamp beyond the supported temporal range");
  return static_cast<TimeIndex>(t);
}

std::vector<STCell> record_cells(const RawRecord& r, UnitId base, std::int64_t unit_seconds) {
  if (r.end < r.start)
    fail(ErrorCode::invalid_argument, "record for '" + r.entity + "' ends before it starts" +
                                          (r.line ? " (line " + std::to_string(r.line) + ")" : ""));
  const auto first = to_time_index(r.start, unit_seconds);
  // Half-open: a presence ending on a unit boundary does not occupy that unit.
  TimeIndex last = first + 1;
  if (r.end > r.start) last = static_cast<TimeIndex>((r.end + unit_seconds - 1) / unit_seconds);
  std::vector<STCell> cells;
  cells.reserve(last - first);
  for (auto t = first; t < last; ++t) cells.push_back({t, base});
  return cells;
}

std::map<std::string, DigitalTrace> discretize_trace(std::span<const RawRecord> raw,
                                                     const SpIndex& index,
                                                     std::int64_t unit_seconds) {
  std::map<std::string, DigitalTrace> out;
  for (const auto& r : raw) {
    const auto unit = index.find(r.location);
    if (!unit)
      fail(ErrorCode::unknown_unit, "unknown location '" + r.location + "'" +
                                        (r.line ? " at line " + std::to_string(r.line) : ""));
    if (!index.is_base(*unit))
      fail(ErrorCode::unknown_unit, "location '" + r.location + "' is not a base spatial unit");
    auto& trace = out[r.entity];
    trace.entity = r.entity;
    auto cells = record_cells(r, *unit, unit_seconds);
    trace.cells.insert(trace.cells.end(), cells.begin(), cells.end());
  }
  for (auto& [_, trace] : out) {
    std::sort(trace.cells.begin(), trace.cells.end());
    trace.cells.erase(std::unique(trace.cells.begin(), trace.cells.end()), trace.cells.end());
  }
  return out;
}

CellSequence lift_sequence(std::span<const std::uint64_t> base_keys, const SpIndex& index) {
  const int m = index.height();
  CellSequence seq(m);
  auto& base = seq.mutable_level(m);
  base.assign(base_keys.begin(), base_keys.end());
  for (auto k : base) {
    const auto c = STCell::from_key(k);
    if (c.unit >= index.unit_count() || !index.is_base(c.unit))
      fail(ErrorCode::unknown_unit, "cell does not reference a base unit");
  }
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  for (int l = m - 1; l >= 1; --l) {
    const auto finer = seq.level(l + 1);
    auto& coarse = seq.mutable_level(l);
    coarse.reserve(finer.size());
    for (auto k : finer) {
      const auto c = STCell::from_key(k);
      coarse.push_back(STCell{c.time, index.parent(c.unit)}.key());
    }
    std::sort(coarse.begin(), coarse.end());
    coarse.erase(std::unique(coarse.begin(), coarse.end()), coarse.end());
  }
  return seq;
}

CellSequence lift_sequence(std::span<const STCell> base_cells, const SpIndex& index) {
  std::vector<std::uint64_t> keys;
  keys.reserve(base_cells.size());
  for (const auto& c : base_cells) keys.push_back(c.key());
  return lift_sequence(keys, index);
}

std::vector<UnitId> unit_path(const SpIndex& index, UnitId unit) {
  std::vector<UnitId> path(static_cast<std::size_t>(index.level(unit)));
  for (auto i = path.size(); i-- > 0;) {
    path[i] = unit;
    unit = index.parent(unit);
  }
  return path;
}

namespace {

UnitId lowest_common_ancestor(const SpIndex& index, UnitId a, UnitId b) {
  int la = index.level(a), lb = index.level(b);
  while (la > lb) a = index.parent(a), --la;
  while (lb > la) b = index.parent(b), --lb;
  while (a != b) a = index.parent(a), b = index.parent(b);
  return a;
}

bool is_ancestor(const SpIndex& index, UnitId anc, UnitId u) {
  const int la = index.level(anc);
  if (index.level(u) < la) return false;
  return index.ancestor(u, la) == anc;
}

}  // namespace

std::vector<AjPI> ajpis(const CellSequence& a, const CellSequence& b, const SpIndex& index) {
  const auto ca = a.base();
  const auto cb = b.base();
  // Deepest common units per shared time, then merged into contiguous runs.
  struct Hit {
    UnitId unit;
    TimeIndex time;
  };
  std::vector<Hit> hits;
  std::size_t i = 0, j = 0;
  while (i < ca.size() && j < cb.size()) {
    const auto ta = STCell::from_key(ca[i]).time;
    const auto tb = STCell::from_key(cb[j]).time;
    if (ta < tb) {
      ++i;
      continue;
    }
    if (tb < ta) {
      ++j;
      continue;
    }
    std::size_t ie = i, je = j;
    while (ie < ca.size() && STCell::from_key(ca[ie]).time == ta) ++ie;
    while (je < cb.size() && STCell::from_key(cb[je]).time == ta) ++je;
    std::vector<UnitId> common;
    for (auto x = i; x < ie; ++x)
      for (auto y = j; y < je; ++y) {
        const auto lca = lowest_common_ancestor(index, STCell::from_key(ca[x]).unit,
                                                STCell::from_key(cb[y]).unit);
        if (lca != index.root()) common.push_back(lca);
      }
    std::sort(common.begin(), common.end());
    common.erase(std::unique(common.begin(), common.end()), common.end());
    for (auto u : common) {
      const bool shadowed = std::any_of(common.begin(), common.end(), [&](UnitId v) {
        return v != u && is_ancestor(index, u, v);
      });
      if (!shadowed) hits.push_back({u, ta});
    }
    i = ie;
    j = je;
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
    return x.unit != y.unit ? x.unit < y.unit : x.time < y.time;
  });
  std::vector<AjPI> out;
  for (std::size_t k = 0; k < hits.size();) {
    std::size_t e = k + 1;
    while (e < hits.size() && hits[e].unit == hits[k].unit &&
           hits[e].time == hits[e - 1].time + 1)
      ++e;
    AjPI p;
    p.tid = index.tid();
    p.level = index.level(hits[k].unit);
    p.path = unit_path(index, hits[k].unit);
    p.start = hits[k].time;
    p.end = hits[e - 1].time + 1;
    out.push_back(std::move(p));
    k = e;
  }
  std::sort(out.begin(), out.end(), [](const AjPI& x, const AjPI& y) {
    return x.start != y.start ? x.start < y.start : x.path < y.path;
  });
  return out;
}

std::vector<AjPI> ajpis(const CellSequence& a, const std::string& tid_a, const CellSequence& b,
                        const std::string& tid_b, const SpIndex& index) {
  if (tid_a != tid_b || tid_a != index.tid())
    fail(ErrorCode::invalid_argument, "AjPIs require traces on the same sp-index tree");
  return ajpis(a, b, index);
}

std::size_t intersection_size(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::size_t n = 0;
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace minsig
