#pragma once

// Pruning-effectiveness model, PE measurement and ranking comparison
// metrics.

#include <cstdint>
#include <span>
#include <vector>

#include "minsig/query.hpp"

namespace minsig {

struct PEConfig {
  std::uint64_t n = 1;           // base units
  std::uint64_t t = 1;           // temporal units
  std::uint32_t hash_count = 1;  // n_h
  std::uint32_t trace_size = 1;  // typical |seq^m|
  std::uint32_t sub_ranges = 64; // n_r
  std::uint32_t min_shared = 1;  // n_c
  double expected_degree = 0;    // d_e

  std::uint64_t range() const noexcept { return n * t; }
  void validate() const;
};

/// Probability that one signature value equals i, summed term by term over
/// the number of cells attaining the minimum. Not exactly normalized.
double sig_value_pmf(const PEConfig& config, std::uint64_t i);
/// Probability that a node's routing value equals i (maximum of n_h
/// independent signature values).
double routing_value_pmf(const PEConfig& config, std::uint64_t i);

/// Share of leaves per equal-width value bucket.
struct ValueDistribution {
  std::vector<double> share;           // V[j], sums to 1
  std::vector<double> representative;  // value used for bucket j
  double raw_mass = 1;                 // mass before normalization
};

/// Buckets routing_value_pmf; the result is normalized and the raw mass
/// is reported.
ValueDistribution analytic_value_distribution(const PEConfig& config);
/// Buckets the routing values of the tree's leaves.
ValueDistribution leaf_value_distribution(const MinSigTree& tree, const PEConfig& config);
/// Buckets each leaf's effective value: (n*t - 1) times the share of random
/// base cells pruned along its root-to-leaf path. `probes` cells are drawn
/// uniformly over the hash range starting at `first_time`.
ValueDistribution path_value_distribution(const MinSigTree& tree, const HashFamily& family,
                                          const SpIndex& index, const PEConfig& config,
                                          TimeIndex first_time, std::size_t probes, std::uint64_t seed,
                                          PruneScope scope = PruneScope::all_levels);

/// Probability that at least n_c of the trace's cells escape pruning under
/// routing value `value`.
double keep_probability(const PEConfig& config, double value);
/// sum_j V[j] q(R[j]). Errors when V does not sum to 1.
double predict_pe(const PEConfig& config, const ValueDistribution& v);
double predict_pe(const PEConfig& config);

/// Mean PE over queries. Errors on empty input.
double measure_pe(std::span<const QueryResult> results);

/// Discordant pairs over n(n-1)/2. Errors when the lists hold different
/// elements or fewer than two.
double kendall_tau(std::span<const EntityId> a, std::span<const EntityId> b);
/// Expected Kendall distance after appending each list's missing elements
/// in uniformly random order. Errors on length mismatch.
double k_avg(std::span<const EntityId> a, std::span<const EntityId> b);
/// Mean positional absolute degree gap. Errors on length mismatch.
double ad_diff(std::span<const double> a, std::span<const double> b);

struct Correlation {
  double rho = 0;
  double p_value = 1;
};
/// Spearman rank correlation with a two-sided t-test p-value.
Correlation spearman(std::span<const double> x, std::span<const double> y);

struct DegreeEstimate {
  double expected_degree = 0;  // mean k-th best degree
  /// Smallest base overlap among sampled pairs at or above expected_degree
  /// (at least 1).
  std::uint32_t min_shared = 1;
  /// Fewest unpruned query cells for which the bound still reaches
  /// expected_degree; see bound_min_shared.
  std::uint32_t bound_shared = 1;
  std::uint32_t trace_size = 1;
};
/// Smallest a in [1, trace_size] such that a query with a available cells at
/// every level has a bound >= degree; trace_size + 1 when none does.
std::uint32_t bound_min_shared(const Measure& measure, std::uint32_t trace_size, double degree);
/// d_e, n_c and the typical base trace size from sampled queries.
DegreeEstimate estimate_degree_parameters(std::span<const CellSequence> corpus,
                                          std::span<const EntityId> queries, std::size_t k,
                                          const Measure& measure);

}  // namespace minsig
