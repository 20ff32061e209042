#pragma once

// Cluster bitmap baseline: base cells are clustered by co-occurrence, every
// entity becomes a bit vector over clusters, and entities sharing a vector
// are scored together under one upper bound.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "minsig/query.hpp"

namespace minsig {

struct BaselineConfig {
  std::uint32_t cluster_count = 64;
  double min_support = 0.5;
  /// Only cell pairs at most this many temporal units apart are counted.
  std::uint32_t time_window = 1;
};

class BitmapIndex {
 public:
  std::uint32_t cluster_count() const noexcept { return cluster_count_; }
  /// Cluster of a base cell key, or -1 when the corpus never visits it.
  std::int64_t cluster_of(std::uint64_t key) const;
  std::size_t group_count() const noexcept { return groups_.size(); }
  const std::vector<std::uint32_t>& cluster_sizes() const noexcept { return sizes_; }
  std::size_t entity_count() const noexcept { return entity_count_; }

  friend BitmapIndex baseline_build(std::span<const CellSequence> corpus, const BaselineConfig& config);
  friend QueryResult baseline_topk(const BitmapIndex& bitmap, std::span<const CellSequence> corpus,
                                   const SpIndex& index, const QueryRequest& request,
                                   const Measure& measure);

 private:
  struct Group {
    std::vector<std::uint64_t> bits;
    std::vector<EntityId> entities;
  };
  std::uint32_t cluster_count_ = 0;
  std::size_t entity_count_ = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> cell_cluster_;
  std::vector<std::uint32_t> sizes_;
  std::vector<Group> groups_;
};

/// Errors on an empty corpus or a zero cluster count.
BitmapIndex baseline_build(std::span<const CellSequence> corpus, const BaselineConfig& config);

/// Groups are scanned in descending bound order until the k-th degree
/// dominates the next bound. Same exactness contract as topk_search.
QueryResult baseline_topk(const BitmapIndex& bitmap, std::span<const CellSequence> corpus,
                          const SpIndex& index, const QueryRequest& request, const Measure& measure);

}  // namespace minsig
