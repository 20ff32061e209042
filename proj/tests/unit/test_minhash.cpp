#include <limits>

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

}  // namespace

TEST_CASE("coarse cells hash to the minimum over their children") {
  const auto idx = fixture::toy_index();
  const auto f = fixture::toy_family(idx);
  CHECK(hash_cell(f, 0, fixture::cell(idx, 1, "L5"), idx) == 2);
  CHECK(hash_cell(f, 0, fixture::cell(idx, 2, "L5"), idx) == 1);
  CHECK(hash_cell(f, 1, fixture::cell(idx, 1, "L5"), idx) == 6);
  CHECK(hash_cell(f, 1, fixture::cell(idx, 2, "L5"), idx) == 3);
  CHECK(hash_cell(f, 0, fixture::cell(idx, 1, "L3"), idx) == 4);
  CHECK_THROWS_AS(hash_cell(f, 2, fixture::cell(idx, 1, "L3"), idx), Error);
  CHECK_THROWS_AS(hash_cell(f, 0, STCell{1, 99}, idx), Error);
}

TEST_CASE("toy signature table") {
  const auto idx = fixture::toy_index();
  const auto f = fixture::toy_family(idx);
  const auto seqs = fixture::toy_sequences(idx);
  const std::vector<std::pair<SigVector, SigVector>> expected{
      {sig({1, 3}), sig({5, 3})},
      {sig({1, 3}), sig({1, 5})},
      {sig({1, 2}), sig({4, 3})},
      {sig({3, 1}), sig({3, 7})},
  };
  const auto set = compute_signature_set(seqs, f, idx);
  for (std::size_t e = 0; e < 4; ++e) {
    const auto s = compute_signatures(seqs[e], f, idx);
    CAPTURE(e);
    CHECK(s.level(1) == expected[e].first);
    CHECK(s.level(2) == expected[e].second);
    CHECK(set.entity(e).level(1) == expected[e].first);
    CHECK(set.entity(e).level(2) == expected[e].second);
  }
}

TEST_CASE("exclusion test") {
  const auto idx = fixture::toy_index();
  const auto f = fixture::toy_family(idx);
  // Entity a's level-2 value 5 at h_1 against T1 L1 (hash 2).
  CHECK(excludes(5, 2, 0, fixture::cell(idx, 1, "L1"), f, idx));
  CHECK_FALSE(excludes(0, 2, 0, fixture::cell(idx, 1, "L1"), f, idx));
  CHECK_FALSE(excludes(2, 2, 0, fixture::cell(idx, 1, "L1"), f, idx));
  CHECK_THROWS_AS(excludes(5, 2, 0, fixture::cell(idx, 1, "L5"), f, idx), Error);
  CHECK(excludes(5, 1, 0, fixture::cell(idx, 1, "L5"), f, idx));
}

TEST_CASE("single-cell trace signature is the cell's hashes") {
  const auto idx = fixture::toy_index();
  const HashFamily f(16, 9, 100);
  const auto seq = lift_sequence(std::vector<STCell>{fixture::cell(idx, 3, "L4")}, idx);
  const auto s = compute_signatures(seq, f, idx);
  for (HashIndex u = 0; u < 16; ++u) {
    CHECK(s.level(2)[u] == f.base_hash(u, 3, idx.base_position(idx.at("L4"))));
    CHECK(s.level(2)[u] < 100);
  }
  CHECK_THROWS_AS(compute_signatures(CellSequence(2), f, idx), Error);
  CHECK_THROWS_AS(HashFamily(0, 1, 10), Error);
  CHECK_THROWS_AS(HashFamily(4, 1, 0), Error);
}

TEST_CASE("signature monotonicity and no false exclusion") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = fixture::small_corpus(200, seed);
    const auto& idx = corpus.index();
    const auto f = corpus_family(corpus, 24, seed);
    const auto set = compute_signature_set(corpus.sequences(), f, idx);
    std::size_t violations = 0;
    for (std::size_t e = 0; e < corpus.size(); ++e) {
      const auto s = set.entity(e);
      for (int l = 1; l < idx.height(); ++l)
        for (HashIndex u = 0; u < f.size(); ++u) violations += s.level(l)[u] > s.level(l + 1)[u];
      for (int j = 1; j <= idx.height(); ++j)
        for (auto key : corpus.sequence(static_cast<EntityId>(e)).level(j))
          for (int i = 1; i <= j; ++i)
            for (HashIndex u = 0; u < f.size(); ++u)
              violations += excludes(s.level(i)[u], i, u, STCell::from_key(key), f, idx);
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("batch signatures match per-entity signatures for any thread count") {
  const auto corpus = fixture::small_corpus(150, 8);
  const auto f = corpus_family(corpus, 100, 3);
  const auto one = compute_signature_set(corpus.sequences(), f, corpus.index(), 1);
  const auto four = compute_signature_set(corpus.sequences(), f, corpus.index(), 4);
  for (int l = 1; l <= one.height(); ++l) CHECK(one.level(l) == four.level(l));
  for (std::size_t e = 0; e < corpus.size(); e += 7) {
    const auto s = compute_signatures(corpus.sequence(static_cast<EntityId>(e)), f, corpus.index());
    for (int l = 1; l <= s.height(); ++l) CHECK(one.level(l).col(static_cast<Eigen::Index>(e)) == s.level(l));
  }
  const auto again = compute_signature_set(corpus.sequences(), corpus_family(corpus, 100, 3), corpus.index());
  CHECK(again.level(1) == one.level(1));
}
