#pragma once

// Exact top-k search over a MinSigTree with per-node upper bounds, and the
// brute-force reference.

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "minsig/adm.hpp"
#include "minsig/minsigtree.hpp"

namespace minsig {

/// Which query cells a path node may prune.
enum class PruneScope {
  /// A node at level j tests query cells at every level >= j; a pruned cell
  /// takes its same-time descendants with it.
  all_levels,
  /// Only base cells are tested; coarser-level bound components stay full.
  base_cells,
};

struct QueryOptions {
  PruneScope scope = PruneScope::all_levels;
  bool record_trace = false;
};

struct RankedEntity {
  EntityId entity = 0;
  double degree = 0;

  friend bool operator==(const RankedEntity&, const RankedEntity&) = default;
};

struct QueryStats {
  std::size_t entities_examined = 0;
  std::size_t nodes_visited = 0;
  std::size_t corpus_size = 0;
  double pe = 0;
  double wall_micros = 0;
};

/// One bound evaluation, in the order the search produced it.
struct BoundEvent {
  NodeId node = 0;
  double upper_bound = 0;
  std::vector<double> components;  // per level, level 1 first
};

struct QueryResult {
  std::vector<RankedEntity> ranked;  // degree desc, then entity id asc
  QueryStats stats;
  std::vector<BoundEvent> trace;
};

/// Query cells with per-cell parent links and a lazily filled hash cache.
class QueryCells {
 public:
  QueryCells(const CellSequence& query, const HashFamily& family, const SpIndex& index);

  int height() const noexcept { return static_cast<int>(level_begin_.size()) - 1; }
  std::size_t size() const noexcept { return cells_.size(); }
  std::size_t level_begin(int l) const { return level_begin_[static_cast<std::size_t>(l - 1)]; }
  std::size_t level_end(int l) const { return level_begin_[static_cast<std::size_t>(l)]; }
  std::size_t level_size(int l) const { return level_end(l) - level_begin(l); }
  STCell cell(std::size_t i) const { return cells_[i]; }
  /// Index of the same-time parent cell, or npos for level-1 cells.
  std::size_t parent(std::size_t i) const { return parent_[i]; }
  /// h_u for every query cell at levels >= `from_level`.
  const std::vector<HashValue>& hashes(HashIndex u, int from_level);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  const HashFamily* family_;
  const SpIndex* index_;
  std::vector<STCell> cells_;
  std::vector<std::size_t> level_begin_;
  std::vector<std::size_t> parent_;
  struct Cached {
    int from_level;
    std::vector<HashValue> values;
  };
  std::unordered_map<HashIndex, Cached> cache_;
};

/// Marks query cells excluded by one path node and returns how many were
/// newly pruned. `pruned` accumulates along the path.
std::size_t partial_pruned_set(const TreeNode& node, QueryCells& query, PruneScope scope,
                               std::vector<std::uint8_t>& pruned);

/// Per-level bound components for a pruned state, and their weighted sum.
Eigen::VectorXd bound_components(const QueryCells& query, const std::vector<std::uint8_t>& pruned,
                                 const Measure& measure);
double upper_bound(const QueryCells& query, const std::vector<std::uint8_t>& pruned,
                   const Measure& measure);

struct QueryRequest {
  const CellSequence* query = nullptr;
  std::optional<EntityId> query_entity;  // excluded from results when set
  std::size_t k = 1;
};

/// Best-first search. `corpus[e]` is entity e's sequence. Errors: k outside
/// [1, |E|), unknown query entity, family mismatch.
QueryResult topk_search(const MinSigTree& tree, std::span<const CellSequence> corpus,
                        const HashFamily& family, const SpIndex& index, const QueryRequest& request,
                        const Measure& measure, const QueryOptions& options = {});

/// Scores every other entity.
QueryResult brute_force_topk(std::span<const CellSequence> corpus, const QueryRequest& request,
                             const Measure& measure);
/// All degrees against the query (query entity itself gets -1), for reuse
/// across k.
std::vector<double> all_degrees(std::span<const CellSequence> corpus, const QueryRequest& request,
                                const Measure& measure);
/// Top-k from precomputed degrees, ties by entity id.
std::vector<RankedEntity> top_from_degrees(const std::vector<double>& degrees, std::size_t k);

/// Orders (degree desc, entity asc).
inline bool ranks_before(const RankedEntity& a, const RankedEntity& b) {
  return a.degree != b.degree ? a.degree > b.degree : a.entity < b.entity;
}

void validate_request(const QueryRequest& request, std::size_t corpus_size);

}  // namespace minsig
