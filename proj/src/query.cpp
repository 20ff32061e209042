#include "minsig/query.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <queue>

namespace minsig {

namespace {

// Bounds and degrees come from the same arithmetic, but a bound may still
// land an ulp below a degree it dominates mathematically.
constexpr double kBoundSlack = 1e-12;

struct WorstFirst {
  bool operator()(const RankedEntity& a, const RankedEntity& b) const { return ranks_before(a, b); }
};

class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}
  bool full() const { return heap_.size() == k_; }
  double kth() const { return heap_.top().degree; }
  void offer(RankedEntity r) {
    if (heap_.size() < k_) {
      heap_.push(r);
    } else if (ranks_before(r, heap_.top())) {
      heap_.pop();
      heap_.push(r);
    }
  }
  std::vector<RankedEntity> sorted() && {
    std::vector<RankedEntity> out;
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<RankedEntity, std::vector<RankedEntity>, WorstFirst> heap_;
};

bool can_stop(const TopK& top, double bound) {
  return top.full() && (top.kth() >= bound + kBoundSlack || bound <= 0.0);
}

}  // namespace

QueryCells::QueryCells(const CellSequence& query, const HashFamily& family, const SpIndex& index)
    : family_(&family), index_(&index) {
  const int m = query.height();
  level_begin_.push_back(0);
  for (int l = 1; l <= m; ++l) {
    for (auto k : query.level(l)) {
      const auto c = STCell::from_key(k);
      cells_.push_back(c);
      if (l == 1) {
        parent_.push_back(npos);
        continue;
      }
      const STCell up{c.time, index.parent(c.unit)};
      const auto begin = cells_.begin() + static_cast<std::ptrdiff_t>(level_begin_[static_cast<std::size_t>(l - 2)]);
      const auto end = cells_.begin() + static_cast<std::ptrdiff_t>(level_begin_[static_cast<std::size_t>(l - 1)]);
      const auto it = std::lower_bound(begin, end, up);
      if (it == end || *it != up) fail(ErrorCode::invalid_argument, "query sequence is not lifted");
      parent_.push_back(static_cast<std::size_t>(it - cells_.begin()));
    }
    level_begin_.push_back(cells_.size());
  }
}

const std::vector<HashValue>& QueryCells::hashes(HashIndex u, int from_level) {
  auto [it, inserted] = cache_.try_emplace(u);
  auto& entry = it->second;
  if (inserted) {
    entry.from_level = height() + 1;
    entry.values.assign(cells_.size(), std::numeric_limits<HashValue>::max());
  }
  if (from_level < entry.from_level) {
    for (auto i = level_begin(from_level); i < level_begin(entry.from_level); ++i)
      entry.values[i] = hash_cell(*family_, u, cells_[i], *index_);
    entry.from_level = from_level;
  }
  return entry.values;
}

std::size_t partial_pruned_set(const TreeNode& node, QueryCells& query, PruneScope scope,
                               std::vector<std::uint8_t>& pruned) {
  const int m = query.height();
  const int first = scope == PruneScope::base_cells ? m : std::max(node.level, 1);
  std::size_t added = 0;
  const std::vector<HashValue>* route_hashes = nullptr;
  if (node.value > 0) route_hashes = &query.hashes(node.route, first);
  for (int l = 1; l <= m; ++l) {
    for (auto i = query.level_begin(l); i < query.level_end(l); ++i) {
      if (pruned[i]) continue;
      bool drop = scope == PruneScope::all_levels && query.parent(i) != QueryCells::npos &&
                  pruned[query.parent(i)];
      if (!drop && l >= first) {
        if (route_hashes) drop = (*route_hashes)[i] < node.value;
        if (!drop && node.full) {
          const auto& full = *node.full;
          for (HashIndex u = 0; u < full.size() && !drop; ++u)
            if (full[u] > 0) drop = query.hashes(u, first)[i] < full[u];
        }
      }
      if (drop) {
        pruned[i] = 1;
        ++added;
      }
    }
  }
  return added;
}

Eigen::VectorXd bound_components(const QueryCells& query, const std::vector<std::uint8_t>& pruned,
                                 const Measure& measure) {
  Eigen::VectorXd comps(query.height());
  for (int l = 1; l <= query.height(); ++l) {
    std::size_t gone = 0;
    for (auto i = query.level_begin(l); i < query.level_end(l); ++i) gone += pruned[i];
    const auto size = static_cast<double>(query.level_size(l));
    comps[l - 1] = measure.level_bound(size - static_cast<double>(gone), size);
  }
  return comps;
}

double upper_bound(const QueryCells& query, const std::vector<std::uint8_t>& pruned,
                   const Measure& measure) {
  return measure.combine(bound_components(query, pruned, measure));
}

void validate_request(const QueryRequest& request, std::size_t corpus_size) {
  if (!request.query) fail(ErrorCode::invalid_argument, "query sequence missing");
  if (request.k < 1 || request.k >= corpus_size)
    fail(ErrorCode::invalid_argument, "k must lie in [1, " + std::to_string(corpus_size) + ")");
  if (request.query_entity && *request.query_entity >= corpus_size)
    fail(ErrorCode::unknown_entity, "unknown query entity");
}

QueryResult topk_search(const MinSigTree& tree, std::span<const CellSequence> corpus,
                        const HashFamily& family, const SpIndex& index, const QueryRequest& request,
                        const Measure& measure, const QueryOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (!(tree.family() == family.header()))
    fail(ErrorCode::family_mismatch, "index was built with a different hash family");
  if (tree.height() != index.height() || measure.height() != index.height())
    fail(ErrorCode::invalid_argument, "tree, measure and hierarchy heights differ");
  validate_request(request, tree.entity_count());
  if (request.query_entity && !tree.contains(*request.query_entity))
    fail(ErrorCode::unknown_entity, "query entity is not indexed");
  if (request.query->height() != index.height())
    fail(ErrorCode::invalid_argument, "query height does not match the hierarchy");

  QueryResult result;
  QueryCells cells(*request.query, family, index);
  TopK top(request.k);

  struct Entry {
    double ub;
    std::uint64_t order;
    NodeId node;
    std::uint32_t state;
  };
  auto lower = [](const Entry& a, const Entry& b) { return a.ub != b.ub ? a.ub < b.ub : a.order > b.order; };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> queue(lower);
  std::vector<std::vector<std::uint8_t>> states;
  std::vector<std::uint32_t> free_states;
  std::uint64_t order = 0;
  states.emplace_back(cells.size(), 0);
  queue.push({1.0, order++, tree.root(), 0});

  while (!queue.empty()) {
    const Entry entry = queue.top();
    queue.pop();
    if (can_stop(top, entry.ub)) break;
    const auto& node = tree.node(entry.node);
    if (node.level == tree.height()) {
      for (auto e : node.entities) {
        if (request.query_entity && e == *request.query_entity) continue;
        top.offer({e, measure.score(*request.query, corpus[e])});
        ++result.stats.entities_examined;
      }
    } else {
      for (auto child : node.children) {
        std::uint32_t slot;
        if (!free_states.empty()) {
          slot = free_states.back();
          free_states.pop_back();
          states[slot] = states[entry.state];
        } else {
          slot = static_cast<std::uint32_t>(states.size());
          states.push_back(states[entry.state]);
        }
        partial_pruned_set(tree.node(child), cells, options.scope, states[slot]);
        const auto comps = bound_components(cells, states[slot], measure);
        const double ub = std::min(entry.ub, measure.combine(comps));
        ++result.stats.nodes_visited;
        if (options.record_trace)
          result.trace.push_back({child, ub, std::vector<double>(comps.data(), comps.data() + comps.size())});
        if (can_stop(top, ub)) {
          free_states.push_back(slot);
          continue;
        }
        queue.push({ub, order++, child, slot});
      }
    }
    if (entry.state != 0) free_states.push_back(entry.state);
  }

  result.ranked = std::move(top).sorted();
  result.stats.corpus_size = tree.entity_count();
  result.stats.pe = (static_cast<double>(result.stats.entities_examined) - static_cast<double>(request.k)) /
                    static_cast<double>(tree.entity_count());
  result.stats.wall_micros =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<double> all_degrees(std::span<const CellSequence> corpus, const QueryRequest& request,
                                const Measure& measure) {
  validate_request(request, corpus.size());
  std::vector<double> degrees(corpus.size());
  for (std::size_t e = 0; e < corpus.size(); ++e)
    degrees[e] = request.query_entity && e == *request.query_entity ? -1.0
                                                                     : measure.score(*request.query, corpus[e]);
  return degrees;
}

std::vector<RankedEntity> top_from_degrees(const std::vector<double>& degrees, std::size_t k) {
  TopK top(k);
  for (std::size_t e = 0; e < degrees.size(); ++e)
    if (degrees[e] >= 0) top.offer({static_cast<EntityId>(e), degrees[e]});
  return std::move(top).sorted();
}

QueryResult brute_force_topk(std::span<const CellSequence> corpus, const QueryRequest& request,
                             const Measure& measure) {
  const auto started = std::chrono::steady_clock::now();
  QueryResult result;
  const auto degrees = all_degrees(corpus, request, measure);
  result.ranked = top_from_degrees(degrees, request.k);
  result.stats.entities_examined = corpus.size() - (request.query_entity ? 1 : 0);
  result.stats.corpus_size = corpus.size();
  result.stats.pe = (static_cast<double>(result.stats.entities_examined) - static_cast<double>(request.k)) /
                    static_cast<double>(corpus.size());
  result.stats.wall_micros =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace minsig
