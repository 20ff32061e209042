#include "minsig/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <queue>

namespace minsig {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::int64_t BitmapIndex::cluster_of(std::uint64_t key) const {
  const auto it = cell_cluster_.find(key);
  return it == cell_cluster_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

BitmapIndex baseline_build(std::span<const CellSequence> corpus, const BaselineConfig& config) {
  if (corpus.empty()) fail(ErrorCode::invalid_argument, "baseline needs a nonempty corpus");
  if (config.cluster_count == 0) fail(ErrorCode::invalid_argument, "cluster count must be positive");

  // Dense ids for every visited base cell, with support counts.
  std::vector<std::uint64_t> keys;
  for (const auto& seq : corpus) keys.insert(keys.end(), seq.base().begin(), seq.base().end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  auto id_of = [&](std::uint64_t k) {
    return static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), k) - keys.begin());
  };
  std::vector<std::uint32_t> support(keys.size(), 0);
  std::unordered_map<std::uint64_t, std::uint32_t> pair_support;
  for (const auto& seq : corpus) {
    const auto base = seq.base();
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto a = id_of(base[i]);
      ++support[a];
      const auto ta = STCell::from_key(base[i]).time;
      for (std::size_t j = i + 1; j < base.size(); ++j) {
        if (STCell::from_key(base[j]).time - ta > config.time_window) break;
        const auto b = id_of(base[j]);
        ++pair_support[(static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b)];
      }
    }
  }
  DisjointSets sets(keys.size());
  std::vector<std::pair<std::uint64_t, std::uint32_t>> pairs(pair_support.begin(), pair_support.end());
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [pair, both] : pairs) {
    const auto a = static_cast<std::size_t>(pair >> 32);
    const auto b = static_cast<std::size_t>(pair & 0xffffffffu);
    const double jaccard = static_cast<double>(both) / (support[a] + support[b] - both);
    if (jaccard >= config.min_support) sets.unite(a, b);
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < keys.size(); ++i) components[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> clusters;
  for (auto& [_, cells] : components) clusters.push_back(std::move(cells));

  // Size-balanced merging of the two smallest, or halving of the largest.
  auto by_size = [&](std::size_t x, std::size_t y) {
    return clusters[x].size() != clusters[y].size() ? clusters[x].size() > clusters[y].size() : x > y;
  };
  if (clusters.size() > config.cluster_count) {
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_size)> heap(by_size);
    for (std::size_t i = 0; i < clusters.size(); ++i) heap.push(i);
    std::size_t live = clusters.size();
    while (live > config.cluster_count) {
      const auto a = heap.top();
      heap.pop();
      const auto b = heap.top();
      heap.pop();
      clusters[std::min(a, b)].insert(clusters[std::min(a, b)].end(), clusters[std::max(a, b)].begin(),
                                      clusters[std::max(a, b)].end());
      clusters[std::max(a, b)].clear();
      heap.push(std::min(a, b));
      --live;
    }
    std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  }
  while (clusters.size() < config.cluster_count) {
    auto largest = std::max_element(clusters.begin(), clusters.end(),
                                    [](const auto& x, const auto& y) { return x.size() < y.size(); });
    if (largest->size() < 2) break;
    std::sort(largest->begin(), largest->end());
    const auto half = largest->size() / 2;
    std::vector<std::size_t> tail(largest->begin() + static_cast<std::ptrdiff_t>(half), largest->end());
    largest->resize(half);
    clusters.push_back(std::move(tail));
  }

  BitmapIndex out;
  out.cluster_count_ = static_cast<std::uint32_t>(clusters.size());
  out.entity_count_ = corpus.size();
  std::vector<std::uint32_t> cluster_of_cell(keys.size());
  for (std::uint32_t c = 0; c < clusters.size(); ++c) {
    out.sizes_.push_back(static_cast<std::uint32_t>(clusters[c].size()));
    for (auto i : clusters[c]) {
      cluster_of_cell[i] = c;
      out.cell_cluster_[keys[i]] = c;
    }
  }
  const std::size_t words = (clusters.size() + 63) / 64;
  std::map<std::vector<std::uint64_t>, std::vector<EntityId>> groups;
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    std::vector<std::uint64_t> bits(words, 0);
    for (auto k : corpus[e].base()) {
      const auto c = cluster_of_cell[id_of(k)];
      bits[c / 64] |= std::uint64_t{1} << (c % 64);
    }
    groups[std::move(bits)].push_back(static_cast<EntityId>(e));
  }
  for (auto& [bits, members] : groups) out.groups_.push_back({bits, std::move(members)});
  return out;
}

QueryResult baseline_topk(const BitmapIndex& bitmap, std::span<const CellSequence> corpus,
                          const SpIndex& index, const QueryRequest& request, const Measure& measure) {
  const auto started = std::chrono::steady_clock::now();
  validate_request(request, corpus.size());
  if (corpus.size() != bitmap.entity_count())
    fail(ErrorCode::invalid_argument, "bitmap index was built on a different corpus");
  const auto& q = *request.query;
  const int m = q.height();
  const std::size_t words = (bitmap.cluster_count() + 63) / 64;

  // Clusters that could share each query cell: those holding a corpus base
  // cell under it at the same time.
  std::vector<std::vector<std::vector<std::uint64_t>>> cover(static_cast<std::size_t>(m));
  for (int l = 1; l <= m; ++l) {
    for (auto key : q.level(l)) {
      const auto cell = STCell::from_key(key);
      std::vector<std::uint64_t> bits(words, 0);
      const auto range = index.base_range(cell.unit);
      for (auto p = range.begin; p < range.end; ++p) {
        const auto c = bitmap.cluster_of(STCell{cell.time, index.base_unit(p)}.key());
        if (c >= 0) bits[static_cast<std::size_t>(c) / 64] |= std::uint64_t{1} << (c % 64);
      }
      cover[static_cast<std::size_t>(l - 1)].push_back(std::move(bits));
    }
  }

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t g = 0; g < bitmap.groups_.size(); ++g) {
    const auto& bits = bitmap.groups_[g].bits;
    Eigen::VectorXd comps(m);
    for (int l = 1; l <= m; ++l) {
      const auto& level = cover[static_cast<std::size_t>(l - 1)];
      std::size_t avail = 0;
      for (const auto& cb : level) {
        bool shared = false;
        for (std::size_t w = 0; w < words && !shared; ++w) shared = (cb[w] & bits[w]) != 0;
        avail += shared;
      }
      comps[l - 1] = measure.level_bound(static_cast<double>(avail), static_cast<double>(level.size()));
    }
    order.emplace_back(measure.combine(comps), g);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  QueryResult result;
  std::vector<RankedEntity> found;
  auto worse = [](const RankedEntity& a, const RankedEntity& b) { return ranks_before(a, b); };
  std::priority_queue<RankedEntity, std::vector<RankedEntity>, decltype(worse)> top(worse);
  for (const auto& [ub, g] : order) {
    if (top.size() == request.k && (top.top().degree >= ub + 1e-12 || ub <= 0.0)) break;
    ++result.stats.nodes_visited;
    for (auto e : bitmap.groups_[g].entities) {
      if (request.query_entity && e == *request.query_entity) continue;
      const RankedEntity r{e, measure.score(q, corpus[e])};
      ++result.stats.entities_examined;
      if (top.size() < request.k) {
        top.push(r);
      } else if (ranks_before(r, top.top())) {
        top.pop();
        top.push(r);
      }
    }
  }
  while (!top.empty()) {
    result.ranked.push_back(top.top());
    top.pop();
  }
  std::reverse(result.ranked.begin(), result.ranked.end());
  result.stats.corpus_size = corpus.size();
  result.stats.pe = (static_cast<double>(result.stats.entities_examined) - static_cast<double>(request.k)) /
                    static_cast<double>(corpus.size());
  result.stats.wall_micros =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace minsig
