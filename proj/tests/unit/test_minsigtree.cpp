#include <algorithm>
#include <random>

#include "doctest.h"
#include "fixture.hpp"

using namespace minsig;

namespace {

SigVector sig(std::initializer_list<HashValue> v) {
  SigVector s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (auto x : v) s[i++] = x;
  return s;
}

NodeId child_with_route(const MinSigTree& t, NodeId parent, HashIndex route) {
  for (auto c : t.node(parent).children)
    if (t.node(c).route == route) return c;
  return kNoNode;
}

// Every live node's value is at most its members' values at its route.
std::size_t unsound_nodes(const MinSigTree& t, const SignatureSet& sigs) {
  std::size_t bad = 0;
  for (auto id : t.preorder()) {
    if (id == t.root()) continue;
    const auto& n = t.node(id);
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
      const auto& d = t.node(stack.back());
      stack.pop_back();
      for (auto e : d.entities) {
        bad += n.value > sigs.level(n.level)(n.route, e);
        if (n.full) bad += (n.full->array() > sigs.level(n.level).col(e).array()).any();
      }
      for (auto c : d.children) stack.push_back(c);
    }
  }
  return bad;
}

}  // namespace

TEST_CASE("routing index and group signature") {
  CHECK(routing_index(sig({3, 1})) == 0);
  CHECK(routing_index(sig({1, 3})) == 1);
  CHECK(routing_index(sig({5, 5})) == 0);
  const std::vector<SigVector> group{sig({1, 3}), sig({1, 3}), sig({1, 2})};
  CHECK(group_signature(group) == sig({1, 2}));
  CHECK(group_signature(std::vector<SigVector>{sig({4, 3})}) == sig({4, 3}));
  CHECK(group_signature(std::vector<SigVector>{sig({4, 3}), sig({0, 0})}) == sig({0, 0}));
  CHECK_THROWS_AS(group_signature(std::vector<SigVector>{}), Error);
}

TEST_CASE("toy tree grouping") {
  const auto idx = fixture::toy_index();
  const auto f = fixture::toy_family(idx);
  const auto sigs = compute_signature_set(fixture::toy_sequences(idx), f, idx);
  const auto tree = build_tree(sigs, f.header(), TreeConfig{true});
  const auto n1 = child_with_route(tree, tree.root(), 0);
  const auto n2 = child_with_route(tree, tree.root(), 1);
  REQUIRE(n1 != kNoNode);
  REQUIRE(n2 != kNoNode);
  CHECK(tree.node(n2).value == 2);
  CHECK(*tree.node(n2).full == sig({1, 2}));
  CHECK(*tree.node(n1).full == sig({3, 1}));
  const auto n12 = child_with_route(tree, n1, 1);
  const auto n21 = child_with_route(tree, n2, 0);
  const auto n22 = child_with_route(tree, n2, 1);
  REQUIRE(n12 != kNoNode);
  REQUIRE(n21 != kNoNode);
  REQUIRE(n22 != kNoNode);
  CHECK(tree.node(n1).children.size() == 1);
  CHECK(tree.node(n12).value == 7);
  CHECK(tree.node(n21).value == 4);
  CHECK(tree.node(n22).value == 5);
  CHECK(*tree.node(n12).full == sig({3, 7}));
  CHECK(*tree.node(n21).full == sig({4, 3}));
  CHECK(*tree.node(n22).full == sig({1, 5}));
  CHECK(tree.node(n12).entities == std::vector<EntityId>{3});
  CHECK(tree.node(n21).entities == std::vector<EntityId>{0, 2});
  CHECK(tree.node(n22).entities == std::vector<EntityId>{1});
  CHECK(tree.node_count() == 5);
}

TEST_CASE("tiny trees") {
  SignatureSet one;
  one.levels = {SigMatrix(3, 1), SigMatrix(3, 1)};
  one.levels[0] << 1, 4, 2;
  one.levels[1] << 6, 5, 7;
  const FamilyHeader h{3, 1, 10, false};
  const auto t = build_tree(one, h);
  CHECK(t.node_count() == 2);
  const auto leaf = t.leaf_of(0);
  CHECK(t.node(leaf).route == 2);
  CHECK(t.node(leaf).value == 7);
  CHECK(t.node(t.node(leaf).parent).value == 4);

  SignatureSet twins;
  twins.levels = {SigMatrix(3, 2), SigMatrix(3, 2)};
  twins.levels[0] << 1, 1, 4, 4, 2, 2;
  twins.levels[1] << 6, 6, 5, 5, 7, 7;
  const auto t2 = build_tree(twins, h);
  CHECK(t2.leaf_of(0) == t2.leaf_of(1));
  CHECK_THROWS_AS(build_tree(twins, FamilyHeader{4, 1, 10, false}), Error);
}

TEST_CASE("tree invariants on generated corpora") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto corpus = fixture::small_corpus(500, seed);
    const auto built = build_index(corpus, 32, seed, TreeConfig{true});
    const auto& t = built.tree;
    const int m = corpus.index().height();
    CHECK(t.entity_count() == corpus.size());
    CHECK(t.node_count() <= corpus.size() * static_cast<std::size_t>(m));
    CHECK(unsound_nodes(t, built.signatures) == 0);
    std::size_t members = 0;
    for (auto id : t.preorder()) {
      const auto& n = t.node(id);
      CHECK(n.children.size() <= 32);
      for (std::size_t i = 1; i < n.children.size(); ++i)
        CHECK(t.node(n.children[i - 1]).route < t.node(n.children[i]).route);
      if (n.level == m) members += n.entities.size();
      if (id == t.root()) continue;
      // Stored values are exact group minima after a fresh build.
      HashValue low = std::numeric_limits<HashValue>::max();
      std::vector<NodeId> stack{id};
      while (!stack.empty()) {
        const auto& d = t.node(stack.back());
        stack.pop_back();
        for (auto e : d.entities) {
          low = std::min(low, built.signatures.level(n.level)(n.route, e));
          CHECK(routing_index(built.signatures.level(n.level).col(e)) == n.route);
        }
        for (auto c : d.children) stack.push_back(c);
      }
      CHECK(n.value == low);
      CHECK(routing_index(*n.full) == n.route);
    }
    CHECK(members == corpus.size());
    // Thread count does not change the tree.
    const auto again = build_tree(built.signatures, built.family.header(), TreeConfig{true}, 3);
    CHECK(again.leaf_groups() == t.leaf_groups());
  }
}

TEST_CASE("updates keep leaf membership equal to a rebuild") {
  const auto corpus = fixture::small_corpus(400, 21);
  const int m = corpus.index().height();
  auto built = build_index(corpus, 24, 4, TreeConfig{true});
  auto& tree = built.tree;
  auto sigs = built.signatures;
  std::mt19937_64 rng(77);
  // Swap signatures between random entities one at a time.
  for (int step = 0; step < 150; ++step) {
    const auto a = static_cast<EntityId>(rng() % corpus.size());
    const auto b = static_cast<EntityId>(rng() % corpus.size());
    const auto new_sig = sigs.entity(b);
    const auto stats = tree.update_entity(a, new_sig);
    sigs.set_entity(a, new_sig);
    CHECK(stats.nodes_touched == static_cast<std::size_t>(2 * m));
    CHECK(stats.entities_removed == 1);
    CHECK(stats.entities_inserted == 1);
  }
  CHECK(unsound_nodes(tree, sigs) == 0);
  const auto fresh = build_tree(sigs, built.family.header(), TreeConfig{true});
  CHECK(tree.leaf_groups() == fresh.leaf_groups());
  CHECK(tree.node_count() == fresh.node_count());
  CHECK(tree.refresh_stale(sigs) > 0);
  CHECK(tree.stale_count() == 0);
  // After refreshing, values match a fresh build path by path.
  std::map<std::vector<HashIndex>, HashValue> fresh_values, values;
  for (auto id : fresh.preorder()) fresh_values[fresh.route_path(id)] = fresh.node(id).value;
  for (auto id : tree.preorder()) values[tree.route_path(id)] = tree.node(id).value;
  CHECK(values == fresh_values);
}

TEST_CASE("insertions, removals and bulk updates") {
  const auto corpus = fixture::small_corpus(300, 13);
  const int m = corpus.index().height();
  auto built = build_index(corpus, 16, 2);
  auto tree = built.tree;
  const auto sigs = built.signatures;

  // A brand new entity only walks one path.
  const auto fresh_id = static_cast<EntityId>(corpus.size());
  const auto ins = tree.update_entity(fresh_id, sigs.entity(5));
  CHECK(ins.nodes_touched == static_cast<std::size_t>(m));
  CHECK(ins.entities_removed == 0);
  CHECK(tree.leaf_of(fresh_id) == tree.leaf_of(5));

  // Removing a leaf's only entity deletes the leaf.
  EntityId lonely = kNoNode;
  for (EntityId e = 0; e < corpus.size(); ++e)
    if (tree.node(tree.leaf_of(e)).entities.size() == 1) {
      lonely = e;
      break;
    }
  REQUIRE(lonely != kNoNode);
  const auto leaf = tree.leaf_of(lonely);
  UpdateStats rm;
  CHECK(tree.remove_entity(lonely, &rm));
  CHECK_FALSE(tree.node(leaf).alive);
  CHECK(rm.nodes_removed >= 1);
  CHECK_FALSE(tree.contains(lonely));
  CHECK_FALSE(tree.remove_entity(lonely));

  // Bulk of one entity behaves like update_entity.
  auto copy = tree;
  const std::vector<std::pair<EntityId, SignatureList>> one{{7, sigs.entity(9)}};
  copy.bulk_update(one);
  tree.update_entity(7, sigs.entity(9));
  CHECK(copy.leaf_groups() == tree.leaf_groups());

  // A bulk batch of entities that already share a leaf touches just that path.
  const auto& members = built.tree.node(built.tree.leaf_of(0)).entities;
  std::vector<std::pair<EntityId, SignatureList>> same_leaf;
  for (auto e : members) same_leaf.emplace_back(static_cast<EntityId>(corpus.size() + 10 + e), sigs.entity(e));
  auto t2 = built.tree;
  const auto stats = t2.bulk_update(same_leaf);
  CHECK(stats.nodes_touched == static_cast<std::size_t>(m));
  CHECK(stats.nodes_created == 0);

  // Mismatched signatures are rejected.
  SignatureList wrong;
  wrong.levels.assign(static_cast<std::size_t>(m), SigVector::Zero(3));
  CHECK_THROWS_AS(tree.update_entity(1, wrong), Error);
}

TEST_CASE("bulk update with re-routing matches a rebuild") {
  const auto corpus = fixture::small_corpus(300, 31);
  auto built = build_index(corpus, 20, 6, TreeConfig{true});
  auto sigs = built.signatures;
  std::vector<std::pair<EntityId, SignatureList>> batch;
  for (EntityId e = 0; e < 120; ++e) {
    const auto donor = static_cast<EntityId>((e * 37 + 11) % corpus.size());
    batch.emplace_back(e, built.signatures.entity(donor));
  }
  // New entities appended after the existing ids.
  for (EntityId i = 0; i < 30; ++i) batch.emplace_back(static_cast<EntityId>(corpus.size() + i), built.signatures.entity(i));
  for (auto& level : sigs.levels) level.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(corpus.size() + 30));
  for (const auto& [e, s] : batch) sigs.set_entity(e, s);
  const auto stats = built.tree.bulk_update(batch);
  CHECK(stats.entities_removed == 120);
  CHECK(stats.entities_inserted == 150);
  CHECK(unsound_nodes(built.tree, sigs) == 0);
  CHECK(built.tree.leaf_groups() == build_tree(sigs, built.family.header(), TreeConfig{true}).leaf_groups());
  built.tree.refresh_stale(sigs);
  CHECK(unsound_nodes(built.tree, sigs) == 0);
}
