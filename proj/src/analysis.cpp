#include "minsig/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "minsig/mobility.hpp"

namespace minsig {

namespace {

double log_choose(double n, double k) {
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

// Neumaier-compensated accumulation of exp(log terms) with a shared scale.
double log_sum_exp(const std::vector<double>& logs) {
  double top = -std::numeric_limits<double>::infinity();
  for (auto l : logs) top = std::max(top, l);
  if (!std::isfinite(top)) return 0.0;
  double sum = 0, carry = 0;
  for (auto l : logs) {
    const double x = std::exp(l - top);
    const double s = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - s) + x : (x - s) + sum;
    sum = s;
  }
  return std::exp(top) * (sum + carry);
}

double safe_log(double x) { return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

}  // namespace

void PEConfig::validate() const {
  if (n < 1 || t < 1) fail(ErrorCode::invalid_argument, "n and t must be >= 1");
  if (hash_count < 1) fail(ErrorCode::invalid_argument, "hash count must be >= 1");
  if (trace_size < 1) fail(ErrorCode::invalid_argument, "trace size must be >= 1");
  if (sub_ranges < 1) fail(ErrorCode::invalid_argument, "sub-range count must be >= 1");
  if (min_shared < 1) fail(ErrorCode::invalid_argument, "n_c must be >= 1");
}

double sig_value_pmf(const PEConfig& config, std::uint64_t i) {
  config.validate();
  const double N = static_cast<double>(config.range());
  if (i >= config.range()) fail(ErrorCode::invalid_argument, "value outside the hash range");
  const double C = config.trace_size;
  std::vector<double> logs;
  logs.reserve(config.trace_size);
  for (std::uint32_t x = 1; x <= config.trace_size; ++x)
    logs.push_back(log_choose(C, x) + x * std::log(1.0 / N) + (C - x) * safe_log((N - static_cast<double>(i)) / N));
  return log_sum_exp(logs);
}

namespace {

// Cumulative sig_value_pmf below each value, compensated.
std::vector<double> sig_pmf_table(const PEConfig& config) {
  std::vector<double> pmf(config.range());
  for (std::uint64_t i = 0; i < config.range(); ++i) pmf[i] = sig_value_pmf(config, i);
  return pmf;
}

// sum_{x=1}^{n_h} C(n_h,x) p^x P^{n_h-x} = (p + P)^{n_h} - P^{n_h}.
double routing_from(double p_eq, double p_below, std::uint32_t n_h) {
  return std::pow(p_eq + p_below, n_h) - std::pow(p_below, n_h);
}

}  // namespace

double routing_value_pmf(const PEConfig& config, std::uint64_t i) {
  config.validate();
  if (i >= config.range()) fail(ErrorCode::invalid_argument, "value outside the hash range");
  double below = 0, carry = 0;
  for (std::uint64_t x = 0; x < i; ++x) {
    const double v = sig_value_pmf(config, x);
    const double s = below + v;
    carry += std::abs(below) >= std::abs(v) ? (below - s) + v : (v - s) + below;
    below = s;
  }
  return routing_from(sig_value_pmf(config, i), below + carry, config.hash_count);
}

namespace {

ValueDistribution empty_buckets(const PEConfig& config) {
  ValueDistribution v;
  const double width = static_cast<double>(config.range()) / config.sub_ranges;
  v.share.assign(config.sub_ranges, 0.0);
  for (std::uint32_t j = 0; j < config.sub_ranges; ++j) v.representative.push_back((j + 0.5) * width);
  return v;
}

std::size_t bucket_of(const PEConfig& config, double value) {
  const auto j = static_cast<std::size_t>(value * config.sub_ranges / static_cast<double>(config.range()));
  return std::min<std::size_t>(j, config.sub_ranges - 1);
}

}  // namespace

ValueDistribution analytic_value_distribution(const PEConfig& config) {
  config.validate();
  const auto pmf = sig_pmf_table(config);
  auto v = empty_buckets(config);
  double below = 0, carry = 0, total = 0;
  for (std::uint64_t i = 0; i < config.range(); ++i) {
    const double mass = routing_from(pmf[i], below + carry, config.hash_count);
    v.share[bucket_of(config, static_cast<double>(i))] += mass;
    total += mass;
    const double s = below + pmf[i];
    carry += std::abs(below) >= std::abs(pmf[i]) ? (below - s) + pmf[i] : (pmf[i] - s) + below;
    below = s;
  }
  v.raw_mass = total;
  if (total > 0)
    for (auto& s : v.share) s /= total;
  return v;
}

ValueDistribution leaf_value_distribution(const MinSigTree& tree, const PEConfig& config) {
  config.validate();
  auto v = empty_buckets(config);
  std::size_t leaves = 0;
  for (auto id : tree.preorder()) {
    const auto& node = tree.node(id);
    if (node.level != tree.height() || node.entities.empty()) continue;
    v.share[bucket_of(config, node.value)] += 1;
    ++leaves;
  }
  if (leaves == 0) fail(ErrorCode::invalid_argument, "tree has no leaves");
  for (auto& s : v.share) s /= static_cast<double>(leaves);
  v.raw_mass = 1;
  return v;
}

ValueDistribution path_value_distribution(const MinSigTree& tree, const HashFamily& family,
                                          const SpIndex& index, const PEConfig& config,
                                          TimeIndex first_time, std::size_t probes, std::uint64_t seed,
                                          PruneScope scope) {
  config.validate();
  if (probes == 0) fail(ErrorCode::invalid_argument, "need at least one probe cell");
  if (tree.height() != index.height()) fail(ErrorCode::invalid_argument, "tree and hierarchy heights differ");
  std::mt19937_64 rng(derive_seed(seed, "pe-probes"));
  std::vector<QueryCells> cells;
  cells.reserve(probes);
  for (std::size_t i = 0; i < probes; ++i) {
    const auto t = first_time + static_cast<TimeIndex>(unit_uniform(rng) * static_cast<double>(config.t));
    const auto p = static_cast<std::uint32_t>(unit_uniform(rng) * static_cast<double>(index.base_count()));
    const std::vector<STCell> one{{t, index.base_unit(p)}};
    cells.emplace_back(lift_sequence(one, index), family, index);
  }
  auto v = empty_buckets(config);
  const double top = static_cast<double>(config.range()) - 1.0;
  std::size_t leaves = 0;
  std::vector<NodeId> path;
  std::vector<std::uint8_t> pruned;
  for (auto id : tree.preorder()) {
    const auto& leaf = tree.node(id);
    if (leaf.level != tree.height() || leaf.entities.empty()) continue;
    path.clear();
    for (auto x = id; x != tree.root(); x = tree.node(x).parent) path.push_back(x);
    std::size_t hit = 0;
    for (auto& probe : cells) {
      pruned.assign(probe.size(), 0);
      for (auto it = path.rbegin(); it != path.rend(); ++it) partial_pruned_set(tree.node(*it), probe, scope, pruned);
      hit += pruned[probe.size() - 1];
    }
    v.share[bucket_of(config, top * static_cast<double>(hit) / static_cast<double>(probes))] += 1;
    ++leaves;
  }
  if (leaves == 0) fail(ErrorCode::invalid_argument, "tree has no leaves");
  for (auto& s : v.share) s /= static_cast<double>(leaves);
  return v;
}

double keep_probability(const PEConfig& config, double value) {
  config.validate();
  const double C = config.trace_size;
  if (config.min_shared > config.trace_size) return 0.0;
  const double denom = static_cast<double>(config.range()) - 1.0;
  if (denom <= 0) return 1.0;
  const double pruned = std::clamp(value / denom, 0.0, 1.0);
  if (pruned == 0) return 1.0;
  std::vector<double> logs;
  for (std::uint32_t x = config.min_shared; x <= config.trace_size; ++x)
    logs.push_back(log_choose(C, x) + x * safe_log(1.0 - pruned) + (C - x) * std::log(pruned));
  return std::min(1.0, log_sum_exp(logs));
}

double predict_pe(const PEConfig& config, const ValueDistribution& v) {
  config.validate();
  const double mass = std::accumulate(v.share.begin(), v.share.end(), 0.0);
  if (v.share.empty() || std::abs(mass - 1.0) > 1e-6)
    fail(ErrorCode::invalid_argument, "value distribution must sum to 1");
  double pe = 0;
  for (std::size_t j = 0; j < v.share.size(); ++j) pe += v.share[j] * keep_probability(config, v.representative[j]);
  return pe;
}

double predict_pe(const PEConfig& config) { return predict_pe(config, analytic_value_distribution(config)); }

double measure_pe(std::span<const QueryResult> results) {
  if (results.empty()) fail(ErrorCode::invalid_argument, "no query results");
  double sum = 0;
  for (const auto& r : results) sum += r.stats.pe;
  return sum / static_cast<double>(results.size());
}

double kendall_tau(std::span<const EntityId> a, std::span<const EntityId> b) {
  if (a.size() != b.size() || a.size() < 2)
    fail(ErrorCode::invalid_argument, "lists must have equal size >= 2");
  std::unordered_map<EntityId, std::size_t> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i) pos_b[b[i]] = i;
  std::vector<std::size_t> mapped;
  for (auto e : a) {
    const auto it = pos_b.find(e);
    if (it == pos_b.end()) fail(ErrorCode::invalid_argument, "lists hold different elements");
    mapped.push_back(it->second);
  }
  if (pos_b.size() != b.size()) fail(ErrorCode::invalid_argument, "duplicate elements");
  std::size_t discordant = 0;
  for (std::size_t i = 0; i < mapped.size(); ++i)
    for (std::size_t j = i + 1; j < mapped.size(); ++j) discordant += mapped[i] > mapped[j];
  const double n = static_cast<double>(a.size());
  return static_cast<double>(discordant) / (n * (n - 1) / 2);
}

double k_avg(std::span<const EntityId> a, std::span<const EntityId> b) {
  if (a.size() != b.size()) fail(ErrorCode::invalid_argument, "top-k lists differ in length");
  std::unordered_map<EntityId, std::size_t> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) ra[a[i]] = i;
  for (std::size_t i = 0; i < b.size(); ++i) rb[b[i]] = i;
  std::vector<EntityId> all(a.begin(), a.end());
  for (auto e : b)
    if (!ra.count(e)) all.push_back(e);
  const std::size_t n = all.size();
  if (n < 2) return 0.0;
  // Completed list positions: present elements keep their rank, missing ones
  // sit after the list in random order.
  double penalty = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto x = all[i], y = all[j];
      const bool xa = ra.count(x), ya = ra.count(y), xb = rb.count(x), yb = rb.count(y);
      if ((!xa && !ya) || (!xb && !yb)) {
        penalty += 0.5;
        continue;
      }
      // Each side: -1 if x before y, +1 if y before x.
      auto order = [](bool xp, bool yp, std::size_t rx, std::size_t ry) {
        if (xp && yp) return rx < ry ? -1 : 1;
        return xp ? -1 : 1;
      };
      const int oa = order(xa, ya, xa ? ra[x] : 0, ya ? ra[y] : 0);
      const int ob = order(xb, yb, xb ? rb[x] : 0, yb ? rb[y] : 0);
      penalty += oa != ob;
    }
  const double nn = static_cast<double>(n);
  return penalty / (nn * (nn - 1) / 2);
}

double ad_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::invalid_argument, "top-k lists differ in length");
  if (a.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (auto k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) fail(ErrorCode::invalid_argument, "need >= 3 paired values");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  Correlation c;
  if (denom == 0) return c;
  c.rho = std::clamp(ca.dot(cb) / denom, -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
  const boost::math::students_t dist(df);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return c;
}

std::uint32_t bound_min_shared(const Measure& measure, std::uint32_t trace_size, double degree) {
  const auto size = static_cast<double>(trace_size);
  for (std::uint32_t a = 1; a <= trace_size; ++a) {
    const double level = measure.level_bound(static_cast<double>(a), size);
    if (measure.combine(Eigen::VectorXd::Constant(measure.height(), level)) >= degree) return a;
  }
  return trace_size + 1;
}

DegreeEstimate estimate_degree_parameters(std::span<const CellSequence> corpus,
                                          std::span<const EntityId> queries, std::size_t k,
                                          const Measure& measure) {
  if (queries.empty()) fail(ErrorCode::invalid_argument, "no sampled queries");
  DegreeEstimate est;
  double size_sum = 0;
  for (const auto& seq : corpus) size_sum += static_cast<double>(seq.base().size());
  est.trace_size = static_cast<std::uint32_t>(std::max(1.0, std::round(size_sum / static_cast<double>(corpus.size()))));

  std::vector<std::vector<double>> degrees;
  double kth_sum = 0;
  for (auto q : queries) {
    const QueryRequest req{&corpus[q], q, k};
    degrees.push_back(all_degrees(corpus, req, measure));
    kth_sum += top_from_degrees(degrees.back(), k).back().degree;
  }
  est.expected_degree = kth_sum / static_cast<double>(queries.size());

  std::uint32_t smallest = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t s = 0; s < queries.size(); ++s) {
    const auto& q = corpus[queries[s]];
    for (std::size_t e = 0; e < corpus.size(); ++e) {
      if (degrees[s][e] < est.expected_degree || degrees[s][e] <= 0) continue;
      const auto shared = static_cast<std::uint32_t>(intersection_size(q.base(), corpus[e].base()));
      smallest = std::min(smallest, shared);
    }
  }
  est.min_shared = smallest == std::numeric_limits<std::uint32_t>::max() || smallest == 0 ? 1 : smallest;
  est.bound_shared = bound_min_shared(measure, est.trace_size, est.expected_degree);
  return est;
}

}  // namespace minsig
