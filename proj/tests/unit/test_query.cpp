#include <algorithm>
#include <map>

#include "doctest.h"
#include "fixture.hpp"

#include "minsig/baseline.hpp"

using namespace minsig;

namespace {

NodeId child_with_route(const MinSigTree& t, NodeId parent, HashIndex route) {
  for (auto c : t.node(parent).children)
    if (t.node(c).route == route) return c;
  return kNoNode;
}

std::vector<EntityId> subtree_entities(const MinSigTree& t, NodeId id) {
  std::vector<EntityId> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const auto& n = t.node(stack.back());
    stack.pop_back();
    out.insert(out.end(), n.entities.begin(), n.entities.end());
    for (auto c : n.children) stack.push_back(c);
  }
  return out;
}

struct Toy {
  SpIndex index = fixture::toy_index();
  HashFamily family = fixture::toy_family(index);
  std::vector<CellSequence> seqs = fixture::toy_sequences(index);
  Measure measure = fixture::toy_measure();
  MinSigTree tree = build_tree(compute_signature_set(seqs, family, index), family.header());
};

}  // namespace

TEST_CASE("toy query under base-cell pruning") {
  Toy toy;
  const auto& t = toy.tree;
  const auto n1 = child_with_route(t, t.root(), 0);
  const auto n2 = child_with_route(t, t.root(), 1);
  const auto n12 = child_with_route(t, n1, 1);
  const auto n21 = child_with_route(t, n2, 0);
  const auto n22 = child_with_route(t, n2, 1);

  QueryCells cells(toy.seqs[2], toy.family, toy.index);
  std::vector<std::uint8_t> pruned(cells.size(), 0);
  CHECK(partial_pruned_set(t.node(n1), cells, PruneScope::base_cells, pruned) == 0);
  CHECK(upper_bound(cells, pruned, toy.measure) == 1.0);
  CHECK(partial_pruned_set(t.node(n12), cells, PruneScope::base_cells, pruned) == 2);
  CHECK(upper_bound(cells, pruned, toy.measure) == doctest::Approx(0.1).epsilon(1e-15));

  QueryOptions opt;
  opt.scope = PruneScope::base_cells;
  opt.record_trace = true;
  const QueryRequest req{&toy.seqs[2], EntityId{2}, 1};
  const auto r = topk_search(t, toy.seqs, toy.family, toy.index, req, toy.measure, opt);
  std::map<NodeId, double> ub;
  for (const auto& ev : r.trace) ub[ev.node] = ev.upper_bound;
  CHECK(ub.at(n1) == 1.0);
  CHECK(ub.at(n2) == 1.0);
  CHECK(ub.at(n12) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(ub.at(n21) == 1.0);
  CHECK(ub.at(n22) == doctest::Approx(0.1).epsilon(1e-15));
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0].entity == 0);
  CHECK(r.ranked[0].degree == doctest::Approx(0.5).epsilon(1e-15));
  // Only leaf N21 is opened; the query entity itself is skipped.
  CHECK(r.stats.entities_examined == 1);
}

TEST_CASE("toy query under all-level pruning is tighter and still exact") {
  Toy toy;
  const auto& t = toy.tree;
  const auto n1 = child_with_route(t, t.root(), 0);
  QueryCells cells(toy.seqs[2], toy.family, toy.index);
  std::vector<std::uint8_t> pruned(cells.size(), 0);
  // N1 (value 3 at h_1) drops T2 L5 (hash 1) and, with it, T2 L1.
  CHECK(partial_pruned_set(t.node(n1), cells, PruneScope::all_levels, pruned) == 2);
  CHECK(upper_bound(cells, pruned, toy.measure) < 1.0);
  const QueryRequest req{&toy.seqs[2], EntityId{2}, 1};
  const auto r = topk_search(t, toy.seqs, toy.family, toy.index, req, toy.measure);
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0].entity == 0);
  CHECK(r.ranked[0].degree == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("toy brute force") {
  Toy toy;
  const QueryRequest k1{&toy.seqs[2], EntityId{2}, 1};
  const auto r1 = brute_force_topk(toy.seqs, k1, toy.measure);
  CHECK(r1.ranked[0].entity == 0);
  CHECK(r1.ranked[0].degree == doctest::Approx(0.5));
  // c vs b: level 1 shares T2 L5 (Dice 0.5), level 2 nothing: 0.05. c vs d: nothing shared.
  const QueryRequest k2{&toy.seqs[2], EntityId{2}, 2};
  const auto r2 = brute_force_topk(toy.seqs, k2, toy.measure);
  REQUIRE(r2.ranked.size() == 2);
  CHECK(r2.ranked[1].degree == doctest::Approx(0.05));
  CHECK(r2.ranked[1].entity == 1);
  const auto all = all_degrees(toy.seqs, k2, toy.measure);
  CHECK(all[2] == -1.0);
  CHECK(all[3] == 0.0);
  const QueryRequest bad{&toy.seqs[2], EntityId{2}, 4};
  CHECK_THROWS_AS(brute_force_topk(toy.seqs, bad, toy.measure), Error);
  const QueryRequest zero{&toy.seqs[2], EntityId{2}, 0};
  CHECK_THROWS_AS(topk_search(toy.tree, toy.seqs, toy.family, toy.index, zero, toy.measure), Error);
}

TEST_CASE("family mismatch is rejected at query time") {
  Toy toy;
  const HashFamily other(2, 5, 9);
  const QueryRequest req{&toy.seqs[2], EntityId{2}, 1};
  CHECK_THROWS_AS(topk_search(toy.tree, toy.seqs, other, toy.index, req, toy.measure), Error);
}

TEST_CASE("search equals brute force across measures, scopes and k") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto corpus = fixture::small_corpus(400, seed);
    const int m = corpus.index().height();
    const auto built = build_index(corpus, 32, seed, TreeConfig{seed == 2});
    const auto bitmap = baseline_build(corpus.sequences(), BaselineConfig{});
    for (auto v : {MeasureVariant::adm, MeasureVariant::dice, MeasureVariant::jaccard, MeasureVariant::cosine}) {
      MeasureParams p;
      p.variant = v;
      if (v == MeasureVariant::adm) p.duration_exponent = 0.7;
      const Measure measure(p, m);
      for (EntityId q = 0; q < 15; ++q) {
        for (std::size_t k : {1, 10, 50}) {
          const QueryRequest req{&corpus.sequence(q), q, k};
          const auto expected = fixture::degrees_of(brute_force_topk(corpus.sequences(), req, measure).ranked);
          for (auto scope : {PruneScope::all_levels, PruneScope::base_cells}) {
            QueryOptions opt;
            opt.scope = scope;
            const auto got = topk_search(built.tree, corpus.sequences(), built.family, corpus.index(), req, measure, opt);
            CHECK(fixture::degrees_of(got.ranked) == expected);
            CHECK(got.stats.pe >= 0.0);
          }
          const auto base = baseline_topk(bitmap, corpus.sequences(), corpus.index(), req, measure);
          CHECK(fixture::degrees_of(base.ranked) == expected);
        }
      }
    }
  }
}

TEST_CASE("bounds are admissible and tighten along paths") {
  for (std::uint64_t seed = 4; seed <= 6; ++seed) {
    const auto corpus = fixture::small_corpus(300, seed);
    const Measure measure(MeasureParams{}, corpus.index().height());
    const auto built = build_index(corpus, 16, seed);
    std::size_t violations = 0;
    for (EntityId q = 0; q < 20; ++q) {
      QueryOptions opt;
      opt.record_trace = true;
      // k = |E| - 1 forces every node to be expanded.
      const QueryRequest req{&corpus.sequence(q), q, corpus.size() - 1};
      const auto r = topk_search(built.tree, corpus.sequences(), built.family, corpus.index(), req, measure, opt);
      CHECK(r.stats.pe == doctest::Approx(0.0));
      std::map<NodeId, double> ub{{built.tree.root(), 1.0}};
      for (const auto& ev : r.trace) ub[ev.node] = ev.upper_bound;
      for (const auto& ev : r.trace) {
        violations += ev.upper_bound > ub.at(built.tree.node(ev.node).parent) + 1e-15;
        for (auto e : subtree_entities(built.tree, ev.node))
          violations += measure.score(corpus.sequence(q), corpus.sequence(e)) > ev.upper_bound + 1e-12;
      }
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("pruned sets only grow along a path") {
  const auto corpus = fixture::small_corpus(300, 9);
  const auto built = build_index(corpus, 16, 9);
  const auto& t = built.tree;
  std::size_t violations = 0;
  for (EntityId q = 0; q < 10; ++q)
    for (auto leaf_owner : {EntityId{3}, EntityId{50}, EntityId{200}}) {
      QueryCells cells(corpus.sequence(q), built.family, corpus.index());
      std::vector<NodeId> path;
      for (auto id = t.leaf_of(leaf_owner); id != t.root(); id = t.node(id).parent) path.push_back(id);
      std::reverse(path.begin(), path.end());
      std::vector<std::uint8_t> pruned(cells.size(), 0);
      for (auto id : path) {
        const auto before = pruned;
        partial_pruned_set(t.node(id), cells, PruneScope::all_levels, pruned);
        for (std::size_t i = 0; i < pruned.size(); ++i) violations += before[i] && !pruned[i];
        // The ancestor's own exclusions are contained in the accumulated set.
        std::vector<std::uint8_t> alone(cells.size(), 0);
        partial_pruned_set(t.node(id), cells, PruneScope::all_levels, alone);
        for (std::size_t i = 0; i < pruned.size(); ++i) violations += alone[i] && !pruned[i];
      }
    }
  CHECK(violations == 0);
}

TEST_CASE("isolated query returns zero degrees") {
  const auto corpus = fixture::small_corpus(100, 2);
  const auto built = build_index(corpus, 8, 2);
  const Measure measure(MeasureParams{}, corpus.index().height());
  // A cell far outside every trace's time span.
  const auto lonely = lift_sequence(std::vector<STCell>{{corpus.last_time() + 50, corpus.index().base_unit(0)}},
                                    corpus.index());
  const QueryRequest req{&lonely, std::nullopt, 5};
  const auto r = topk_search(built.tree, corpus.sequences(), built.family, corpus.index(), req, measure);
  REQUIRE(r.ranked.size() == 5);
  for (const auto& x : r.ranked) CHECK(x.degree == 0.0);
}

TEST_CASE("baseline clustering") {
  const auto idx = fixture::toy_index();
  // Two cells that always appear together end up in one cluster.
  std::vector<CellSequence> seqs;
  for (int i = 0; i < 5; ++i)
    seqs.push_back(lift_sequence(std::vector<STCell>{fixture::cell(idx, 1, "L1"), fixture::cell(idx, 2, "L3")}, idx));
  seqs.push_back(lift_sequence(std::vector<STCell>{fixture::cell(idx, 5, "L4")}, idx));
  const auto bm = baseline_build(seqs, BaselineConfig{2, 0.5, 1});
  CHECK(bm.cluster_of(fixture::cell(idx, 1, "L1").key()) == bm.cluster_of(fixture::cell(idx, 2, "L3").key()));
  CHECK(bm.cluster_of(fixture::cell(idx, 1, "L1").key()) != bm.cluster_of(fixture::cell(idx, 5, "L4").key()));
  CHECK(bm.cluster_of(fixture::cell(idx, 9, "L2").key()) == -1);
  CHECK(bm.entity_count() == 6);
  CHECK(bm.group_count() == 2);
  // A threshold nothing reaches leaves singletons capped at the cluster count.
  const auto capped = baseline_build(seqs, BaselineConfig{2, 1.5, 1});
  CHECK(capped.cluster_count() <= 2);
  CHECK_THROWS_AS(baseline_build(std::vector<CellSequence>{}, BaselineConfig{}), Error);
  CHECK_THROWS_AS(baseline_build(seqs, BaselineConfig{0, 0.5, 1}), Error);
}
