#pragma once

// MinSigTree: entities grouped level by level by the routing index (argmax
// position) of their level signatures. Each node keeps the minimum of its
// members' signature values at its routing index.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "minsig/minhash.hpp"

namespace minsig {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct TreeNode {
  int level = 0;  // 0 is the virtual root
  HashIndex route = 0;
  HashValue value = 0;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;  // sorted by route
  std::vector<EntityId> entities;  // leaves only
  std::optional<SigVector> full;   // elementwise minimum, when enabled
  bool stale = false;              // value may be below the members' minimum
  bool alive = true;
};

/// Argmax position; ties go to the smallest position.
HashIndex routing_index(const SigVector& sig);
template <typename Derived>
HashIndex routing_index(const Eigen::DenseBase<Derived>& sig) {
  Eigen::Index pos = 0;
  for (Eigen::Index i = 1; i < sig.size(); ++i)
    if (sig.derived().coeff(i) > sig.derived().coeff(pos)) pos = i;
  return static_cast<HashIndex>(pos);
}

/// Elementwise minimum. Errors on an empty list.
SigVector group_signature(std::span<const SigVector> sigs);

struct TreeConfig {
  bool store_full_signatures = false;
};

struct UpdateStats {
  std::size_t nodes_touched = 0;
  std::size_t nodes_created = 0;
  std::size_t nodes_removed = 0;
  std::size_t entities_removed = 0;
  std::size_t entities_inserted = 0;

  UpdateStats& operator+=(const UpdateStats& o);
};

class MinSigTree {
 public:
  MinSigTree() = default;
  MinSigTree(FamilyHeader family, int height, TreeConfig config);

  const FamilyHeader& family() const noexcept { return family_; }
  int height() const noexcept { return height_; }
  const TreeConfig& config() const noexcept { return config_; }
  NodeId root() const noexcept { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t node_slots() const noexcept { return nodes_.size(); }
  /// Live nodes, root excluded.
  std::size_t node_count() const noexcept { return live_nodes_; }
  std::size_t entity_count() const noexcept { return entity_count_; }
  bool contains(EntityId e) const { return e < leaf_of_.size() && leaf_of_[e] != kNoNode; }
  NodeId leaf_of(EntityId e) const;
  /// Leaf entity groups keyed by their route path (level 1 first).
  std::map<std::vector<HashIndex>, std::vector<EntityId>> leaf_groups() const;
  std::vector<HashIndex> route_path(NodeId id) const;
  /// Every live node in preorder (children by route), root first.
  std::vector<NodeId> preorder() const;
  std::size_t stale_count() const;

  /// Moves an entity to the leaf its new signature routes to. Unknown
  /// entities are inserted. Errors on family mismatch.
  UpdateStats update_entity(EntityId e, const SignatureList& sig);
  /// Removes existing entities first, then inserts the batch with one pass
  /// per touched node.
  UpdateStats bulk_update(std::span<const std::pair<EntityId, SignatureList>> updates);
  /// Removes an entity; ancestors that become empty are deleted and the rest
  /// are marked stale. Returns false for an unknown entity.
  bool remove_entity(EntityId e, UpdateStats* stats = nullptr);
  /// Recomputes stale node values (and full signatures) from member
  /// signatures. Returns the number of nodes refreshed.
  std::size_t refresh_stale(const SignatureSet& signatures);

  friend MinSigTree build_tree(const SignatureSet& signatures, const FamilyHeader& family,
                               TreeConfig config, unsigned threads);
  friend class IndexSerializer;

 private:
  NodeId new_node(int level, HashIndex route, NodeId parent);
  void free_node(NodeId id);
  NodeId find_child(NodeId parent, HashIndex route) const;
  void check_signature(const SignatureList& sig) const;
  void set_leaf(EntityId e, NodeId leaf);
  void collect_members(NodeId id, std::vector<EntityId>& out) const;

  FamilyHeader family_;
  int height_ = 0;
  TreeConfig config_;
  std::vector<TreeNode> nodes_;
  std::vector<NodeId> free_;
  std::vector<NodeId> leaf_of_;
  std::size_t entity_count_ = 0;
  std::size_t live_nodes_ = 0;
};

/// Builds the tree over all columns of `signatures` (entity id = column).
MinSigTree build_tree(const SignatureSet& signatures, const FamilyHeader& family,
                      TreeConfig config = {}, unsigned threads = 1);

}  // namespace minsig
