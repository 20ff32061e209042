#include "minsig/minsigtree.hpp"

#include <algorithm>
#include <numeric>

#include "minsig/parallel.hpp"

namespace minsig {

HashIndex routing_index(const SigVector& sig) {
  if (sig.size() == 0) fail(ErrorCode::invalid_argument, "empty signature");
  return routing_index<SigVector>(sig);
}

SigVector group_signature(std::span<const SigVector> sigs) {
  if (sigs.empty()) fail(ErrorCode::invalid_argument, "group signature of an empty group");
  SigVector out = sigs.front();
  for (std::size_t i = 1; i < sigs.size(); ++i) {
    if (sigs[i].size() != out.size()) fail(ErrorCode::family_mismatch, "signature length mismatch");
    out = out.cwiseMin(sigs[i]);
  }
  return out;
}

UpdateStats& UpdateStats::operator+=(const UpdateStats& o) {
  nodes_touched += o.nodes_touched;
  nodes_created += o.nodes_created;
  nodes_removed += o.nodes_removed;
  entities_removed += o.entities_removed;
  entities_inserted += o.entities_inserted;
  return *this;
}

MinSigTree::MinSigTree(FamilyHeader family, int height, TreeConfig config)
    : family_(family), height_(height), config_(config) {
  if (height < 1) fail(ErrorCode::invalid_argument, "tree height must be >= 1");
  nodes_.emplace_back();  // virtual root
}

NodeId MinSigTree::new_node(int level, HashIndex route, NodeId parent) {
  NodeId id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
    nodes_[id] = TreeNode{};
  } else {
    id = static_cast<NodeId>(nodes_.size());
    nodes_.emplace_back();
  }
  auto& n = nodes_[id];
  n.level = level;
  n.route = route;
  n.parent = parent;
  auto& siblings = nodes_[parent].children;
  const auto pos = std::lower_bound(siblings.begin(), siblings.end(), route,
                                    [&](NodeId c, HashIndex r) { return nodes_[c].route < r; });
  siblings.insert(pos, id);
  ++live_nodes_;
  return id;
}

void MinSigTree::free_node(NodeId id) {
  auto& n = nodes_[id];
  auto& siblings = nodes_[n.parent].children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  n = TreeNode{};
  n.alive = false;
  free_.push_back(id);
  --live_nodes_;
}

NodeId MinSigTree::find_child(NodeId parent, HashIndex route) const {
  const auto& kids = nodes_[parent].children;
  const auto pos = std::lower_bound(kids.begin(), kids.end(), route,
                                    [&](NodeId c, HashIndex r) { return nodes_[c].route < r; });
  return pos != kids.end() && nodes_[*pos].route == route ? *pos : kNoNode;
}

void MinSigTree::check_signature(const SignatureList& sig) const {
  if (sig.height() != height_) fail(ErrorCode::family_mismatch, "signature height does not match the tree");
  for (const auto& v : sig.levels)
    if (static_cast<std::uint32_t>(v.size()) != family_.hash_count)
      fail(ErrorCode::family_mismatch, "signature length does not match the hash family");
}

void MinSigTree::set_leaf(EntityId e, NodeId leaf) {
  if (e >= leaf_of_.size()) leaf_of_.resize(static_cast<std::size_t>(e) + 1, kNoNode);
  leaf_of_[e] = leaf;
}

NodeId MinSigTree::leaf_of(EntityId e) const {
  if (!contains(e)) fail(ErrorCode::unknown_entity, "entity " + std::to_string(e) + " is not indexed");
  return leaf_of_[e];
}

bool MinSigTree::remove_entity(EntityId e, UpdateStats* stats) {
  if (!contains(e)) return false;
  UpdateStats local;
  NodeId id = leaf_of_[e];
  auto& members = nodes_[id].entities;
  members.erase(std::lower_bound(members.begin(), members.end(), e));
  leaf_of_[e] = kNoNode;
  --entity_count_;
  ++local.entities_removed;
  while (id != root()) {
    ++local.nodes_touched;
    const NodeId parent = nodes_[id].parent;
    if (nodes_[id].entities.empty() && nodes_[id].children.empty()) {
      free_node(id);
      ++local.nodes_removed;
    } else {
      nodes_[id].stale = true;
    }
    id = parent;
  }
  if (stats) *stats += local;
  return true;
}

UpdateStats MinSigTree::update_entity(EntityId e, const SignatureList& sig) {
  check_signature(sig);
  UpdateStats stats;
  remove_entity(e, &stats);
  NodeId id = root();
  for (int l = 1; l <= height_; ++l) {
    const auto& s = sig.level(l);
    const auto r = routing_index(s);
    NodeId child = find_child(id, r);
    if (child == kNoNode) {
      child = new_node(l, r, id);
      nodes_[child].value = s[r];
      if (config_.store_full_signatures) nodes_[child].full = s;
      ++stats.nodes_created;
    } else {
      auto& n = nodes_[child];
      n.value = std::min(n.value, s[r]);
      if (n.full) *n.full = n.full->cwiseMin(s);
    }
    ++stats.nodes_touched;
    id = child;
  }
  auto& members = nodes_[id].entities;
  members.insert(std::lower_bound(members.begin(), members.end(), e), e);
  set_leaf(e, id);
  ++entity_count_;
  ++stats.entities_inserted;
  return stats;
}

UpdateStats MinSigTree::bulk_update(std::span<const std::pair<EntityId, SignatureList>> updates) {
  for (const auto& [e, sig] : updates) check_signature(sig);
  UpdateStats stats;
  for (const auto& [e, sig] : updates) remove_entity(e, &stats);

  // Later entries for the same entity win.
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return updates[a].first < updates[b].first; });
  std::vector<std::size_t> batch;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (i + 1 == order.size() || updates[order[i + 1]].first != updates[order[i]].first)
      batch.push_back(order[i]);

  struct Frame {
    NodeId node;
    std::vector<std::size_t> members;
  };
  std::vector<Frame> work{{root(), std::move(batch)}};
  while (!work.empty()) {
    Frame f = std::move(work.back());
    work.pop_back();
    const int l = nodes_[f.node].level + 1;
    if (l > height_) {
      auto& members = nodes_[f.node].entities;
      for (auto i : f.members) {
        const auto e = updates[i].first;
        members.insert(std::lower_bound(members.begin(), members.end(), e), e);
        set_leaf(e, f.node);
        ++entity_count_;
        ++stats.entities_inserted;
      }
      continue;
    }
    std::vector<std::pair<HashIndex, std::size_t>> routed;
    routed.reserve(f.members.size());
    for (auto i : f.members) routed.emplace_back(routing_index(updates[i].second.level(l)), i);
    std::stable_sort(routed.begin(), routed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t g = 0; g < routed.size();) {
      const auto r = routed[g].first;
      std::size_t end = g;
      std::vector<std::size_t> members;
      HashValue low = std::numeric_limits<HashValue>::max();
      for (; end < routed.size() && routed[end].first == r; ++end) {
        members.push_back(routed[end].second);
        low = std::min(low, updates[routed[end].second].second.level(l)[r]);
      }
      NodeId child = find_child(f.node, r);
      if (child == kNoNode) {
        child = new_node(l, r, f.node);
        nodes_[child].value = low;
        ++stats.nodes_created;
      } else {
        nodes_[child].value = std::min(nodes_[child].value, low);
      }
      if (config_.store_full_signatures) {
        auto& full = nodes_[child].full;
        for (auto i : members) {
          const auto& s = updates[i].second.level(l);
          full = full ? SigVector(full->cwiseMin(s)) : s;
        }
      }
      ++stats.nodes_touched;
      work.push_back({child, std::move(members)});
      g = end;
    }
  }
  return stats;
}

void MinSigTree::collect_members(NodeId id, std::vector<EntityId>& out) const {
  const auto& n = nodes_[id];
  out.insert(out.end(), n.entities.begin(), n.entities.end());
  for (auto c : n.children) collect_members(c, out);
}

std::size_t MinSigTree::refresh_stale(const SignatureSet& signatures) {
  if (signatures.height() != height_ || signatures.hash_count() != family_.hash_count)
    fail(ErrorCode::family_mismatch, "signature set does not match the tree");
  std::size_t refreshed = 0;
  std::vector<EntityId> members;
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    auto& n = nodes_[id];
    if (!n.alive || !n.stale) continue;
    members.clear();
    collect_members(id, members);
    const auto& level = signatures.level(n.level);
    HashValue low = std::numeric_limits<HashValue>::max();
    for (auto e : members) low = std::min(low, level(n.route, e));
    n.value = low;
    if (n.full) {
      SigVector full = level.col(members.front());
      for (auto e : members) full = full.cwiseMin(level.col(e));
      n.full = std::move(full);
    }
    n.stale = false;
    ++refreshed;
  }
  return refreshed;
}

std::vector<HashIndex> MinSigTree::route_path(NodeId id) const {
  std::vector<HashIndex> path;
  while (id != root()) {
    path.push_back(nodes_.at(id).route);
    id = nodes_[id].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::map<std::vector<HashIndex>, std::vector<EntityId>> MinSigTree::leaf_groups() const {
  std::map<std::vector<HashIndex>, std::vector<EntityId>> out;
  for (NodeId id = 1; id < nodes_.size(); ++id)
    if (nodes_[id].alive && nodes_[id].level == height_ && !nodes_[id].entities.empty())
      out[route_path(id)] = nodes_[id].entities;
  return out;
}

std::vector<NodeId> MinSigTree::preorder() const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const auto& kids = nodes_[id].children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::size_t MinSigTree::stale_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.alive && n.stale; }));
}

MinSigTree build_tree(const SignatureSet& signatures, const FamilyHeader& family, TreeConfig config,
                      unsigned threads) {
  const int m = signatures.height();
  if (m < 1) fail(ErrorCode::invalid_argument, "no signature levels");
  if (signatures.hash_count() != family.hash_count)
    fail(ErrorCode::family_mismatch, "signatures were computed with a different hash family");
  MinSigTree tree(family, m, config);
  const auto E = signatures.entity_count();
  std::vector<std::vector<HashIndex>> routes(static_cast<std::size_t>(m), std::vector<HashIndex>(E));
  parallel_for(E, threads, [&](std::size_t b, std::size_t e) {
    for (int l = 1; l <= m; ++l)
      for (auto i = b; i < e; ++i)
        routes[static_cast<std::size_t>(l - 1)][i] =
            routing_index(signatures.level(l).col(static_cast<Eigen::Index>(i)));
  });

  struct Frame {
    NodeId node;
    std::vector<EntityId> members;
  };
  std::vector<EntityId> all(E);
  std::iota(all.begin(), all.end(), EntityId{0});
  std::vector<Frame> work;
  if (E > 0) work.push_back({tree.root(), std::move(all)});
  while (!work.empty()) {
    Frame f = std::move(work.back());
    work.pop_back();
    const int level = tree.nodes_[f.node].level;
    if (level == m) {
      for (auto e : f.members) tree.set_leaf(e, f.node);
      tree.entity_count_ += f.members.size();
      tree.nodes_[f.node].entities = std::move(f.members);
      continue;
    }
    const auto& route = routes[static_cast<std::size_t>(level)];
    const auto& sig = signatures.level(level + 1);
    std::stable_sort(f.members.begin(), f.members.end(),
                     [&](EntityId a, EntityId b) { return route[a] < route[b]; });
    std::vector<Frame> children;
    for (std::size_t g = 0; g < f.members.size();) {
      const auto r = route[f.members[g]];
      auto end = g;
      while (end < f.members.size() && route[f.members[end]] == r) ++end;
      const auto child = tree.new_node(level + 1, r, f.node);
      std::vector<EntityId> members(f.members.begin() + static_cast<std::ptrdiff_t>(g),
                                    f.members.begin() + static_cast<std::ptrdiff_t>(end));
      HashValue low = std::numeric_limits<HashValue>::max();
      for (auto e : members) low = std::min(low, sig(r, e));
      tree.nodes_[child].value = low;
      if (config.store_full_signatures) {
        SigVector full = sig.col(members.front());
        for (auto e : members) full = full.cwiseMin(sig.col(e));
        tree.nodes_[child].full = std::move(full);
      }
      children.push_back({child, std::move(members)});
      g = end;
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) work.push_back(std::move(*it));
  }
  return tree;
}

}  // namespace minsig
