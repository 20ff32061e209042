#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixture.hpp"

using namespace minsig;

namespace {

PEConfig small_config() {
  PEConfig c;
  c.n = 64;
  c.t = 8;
  c.trace_size = 10;
  c.hash_count = 4;
  c.sub_ranges = 16;
  return c;
}

// Average Kendall distance over every completion of both lists.
double brute_k_avg(const std::vector<EntityId>& a, const std::vector<EntityId>& b) {
  auto missing = [](const std::vector<EntityId>& from, const std::vector<EntityId>& other) {
    std::vector<EntityId> out;
    for (auto e : other)
      if (std::find(from.begin(), from.end(), e) == from.end()) out.push_back(e);
    std::sort(out.begin(), out.end());
    return out;
  };
  auto ma = missing(a, b), mb = missing(b, a);
  double sum = 0, count = 0;
  do {
    do {
      auto ca = a, cb = b;
      ca.insert(ca.end(), ma.begin(), ma.end());
      cb.insert(cb.end(), mb.begin(), mb.end());
      sum += ca.size() < 2 ? 0.0 : kendall_tau(ca, cb);
      count += 1;
    } while (std::next_permutation(mb.begin(), mb.end()));
  } while (std::next_permutation(ma.begin(), ma.end()));
  return sum / count;
}

}  // namespace

TEST_CASE("signature value pmf") {
  auto c = small_config();
  c.trace_size = 1;
  for (std::uint64_t i : {0ull, 17ull, 511ull}) CHECK(sig_value_pmf(c, i) == doctest::Approx(1.0 / 512.0));
  c.trace_size = 10;
  CHECK(sig_value_pmf(c, 0) == doctest::Approx(std::pow(1.0 + 1.0 / 512.0, 10) - 1.0).epsilon(1e-12));
  double total = 0;
  for (std::uint64_t i = 0; i < c.range(); ++i) total += sig_value_pmf(c, i);
  CHECK(std::abs(total - 1.0) < 0.02);
  CHECK(sig_value_pmf(c, 3) < sig_value_pmf(c, 2));
  CHECK_THROWS_AS(sig_value_pmf(c, c.range()), Error);
  c.hash_count = 0;
  CHECK_THROWS_AS(sig_value_pmf(c, 0), Error);
}

TEST_CASE("routing value pmf") {
  auto c = small_config();
  c.hash_count = 1;
  for (std::uint64_t i : {0ull, 40ull, 300ull})
    CHECK(routing_value_pmf(c, i) == doctest::Approx(sig_value_pmf(c, i)).epsilon(1e-12));
  c.hash_count = 2;
  CHECK(routing_value_pmf(c, 0) == doctest::Approx(std::pow(sig_value_pmf(c, 0), 2)).epsilon(1e-12));

  // More hash functions push the routing value up.
  double mean_prev = 0;
  for (std::uint32_t nh : {1u, 4u, 16u}) {
    c.hash_count = nh;
    const auto v = analytic_value_distribution(c);
    CHECK(std::accumulate(v.share.begin(), v.share.end(), 0.0) == doctest::Approx(1.0));
    double mean = 0, cum = 0;
    for (std::size_t j = 0; j < v.share.size(); ++j) {
      mean += v.share[j] * v.representative[j];
      cum += v.share[j];
      CHECK(cum <= 1.0 + 1e-9);
    }
    CHECK(mean > mean_prev);
    mean_prev = mean;
  }
}

TEST_CASE("keep probability and predicted PE") {
  auto c = small_config();
  CHECK(keep_probability(c, 0) == 1.0);
  c.min_shared = 11;
  CHECK(keep_probability(c, 200) == 0.0);
  CHECK(predict_pe(c) == 0.0);
  c.min_shared = 2;
  double prev = 2;
  for (double r : {0.0, 50.0, 200.0, 400.0, 511.0}) {
    const double q = keep_probability(c, r);
    CHECK(q >= 0);
    CHECK(q <= prev);
    prev = q;
  }
  CHECK(keep_probability(c, 511) == 0.0);
  prev = 2;
  for (std::uint32_t nh : {1u, 8u, 64u}) {
    c.hash_count = nh;
    const double pe = predict_pe(c);
    CHECK(pe <= prev + 1e-12);
    CHECK(pe >= 0);
    prev = pe;
  }
  ValueDistribution broken;
  broken.share = {0.5};
  broken.representative = {1};
  CHECK_THROWS_AS(predict_pe(c, broken), Error);
}

TEST_CASE("measured PE is the mean over queries") {
  std::vector<QueryResult> results(3);
  results[0].stats.pe = 0.2;
  results[1].stats.pe = 0.4;
  results[2].stats.pe = 0.9;
  CHECK(measure_pe(results) == doctest::Approx(0.5));
  CHECK_THROWS_AS(measure_pe(std::vector<QueryResult>{}), Error);

  // examined - k over corpus size, straight from a search.
  const auto corpus = fixture::small_corpus(300, 4);
  const auto built = build_index(corpus, 32, 1);
  MeasureParams p;
  const Measure m(p, corpus.index().height());
  const auto r = topk_search(built.tree, corpus.sequences(), built.family, corpus.index(), QueryRequest{&corpus.sequence(3), 3, 10}, m);
  CHECK(r.stats.pe == doctest::Approx((static_cast<double>(r.stats.entities_examined) - 10.0) / 300.0));
}

TEST_CASE("kendall distance") {
  const std::vector<EntityId> x{1, 2, 3, 4};
  std::vector<EntityId> rev(x.rbegin(), x.rend());
  CHECK(kendall_tau(x, x) == 0.0);
  CHECK(kendall_tau(x, rev) == 1.0);
  CHECK(kendall_tau(std::vector<EntityId>{1, 2, 3}, std::vector<EntityId>{1, 3, 2}) == doctest::Approx(1.0 / 3.0));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = x, b = x, c = x;
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    std::shuffle(c.begin(), c.end(), rng);
    CHECK(kendall_tau(a, b) == kendall_tau(b, a));
    CHECK(kendall_tau(a, c) <= kendall_tau(a, b) + kendall_tau(b, c) + 1e-12);
  }
  CHECK_THROWS_AS(kendall_tau(std::vector<EntityId>{1, 2}, std::vector<EntityId>{1, 3}), Error);
  CHECK_THROWS_AS(kendall_tau(std::vector<EntityId>{1}, std::vector<EntityId>{1}), Error);
  CHECK_THROWS_AS(kendall_tau(std::vector<EntityId>{1, 2}, std::vector<EntityId>{1, 2, 3}), Error);
}

TEST_CASE("average Kendall distance of top-k lists") {
  const std::vector<EntityId> a{1, 2}, b{3, 4};
  CHECK(k_avg(a, b) == doctest::Approx(brute_k_avg(a, b)));
  CHECK(k_avg(a, b) == doctest::Approx(5.0 / 6.0));
  CHECK(k_avg(a, a) == 0.0);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 4;
    std::vector<EntityId> pool(7);
    std::iota(pool.begin(), pool.end(), EntityId{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<EntityId> p(pool.begin(), pool.begin() + static_cast<long>(k));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<EntityId> q(pool.begin(), pool.begin() + static_cast<long>(k));
    CAPTURE(trial);
    CHECK(k_avg(p, q) == doctest::Approx(brute_k_avg(p, q)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(k_avg(a, std::vector<EntityId>{1}), Error);
}

TEST_CASE("degree differences") {
  const std::vector<double> a{0.9, 0.5, 0.2}, b{0.8, 0.4, 0.1};
  CHECK(ad_diff(a, b) == doctest::Approx(0.1));
  CHECK(ad_diff(a, a) == 0.0);
  CHECK_THROWS_AS(ad_diff(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("spearman correlation") {
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    y.push_back(i * i);
  }
  const auto up = spearman(x, y);
  CHECK(up.rho == 1.0);
  CHECK(up.p_value == 0.0);
  std::reverse(y.begin(), y.end());
  CHECK(spearman(x, y).rho == -1.0);
  const auto tied = spearman(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{5, 6, 7, 8, 7});
  CHECK(tied.rho == doctest::Approx(0.8207826816681233));
  CHECK(tied.p_value == doctest::Approx(0.08858700531354381).epsilon(1e-6));
  const auto flat = spearman(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4});
  CHECK(flat.rho == 0.0);
  CHECK(flat.p_value == 1.0);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("degree parameter estimates") {
  const auto corpus = fixture::small_corpus(300, 6);
  MeasureParams p;
  const Measure m(p, corpus.index().height());
  std::vector<EntityId> queries{0, 5, 9, 40};
  const auto est = estimate_degree_parameters(corpus.sequences(), queries, 10, m);
  CHECK(est.expected_degree > 0);
  CHECK(est.expected_degree <= 1);
  CHECK(est.min_shared >= 1);
  CHECK(est.bound_shared >= 1);
  CHECK(est.bound_shared <= est.trace_size + 1);
  CHECK(bound_min_shared(m, est.trace_size, 0.0) == 1);
  CHECK(bound_min_shared(m, est.trace_size, 1.0) == est.trace_size);
  CHECK(bound_min_shared(m, est.trace_size, 1.5) == est.trace_size + 1);
  CHECK_THROWS_AS(estimate_degree_parameters(corpus.sequences(), std::vector<EntityId>{}, 10, m), Error);
}
