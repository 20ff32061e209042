#pragma once

// Experiment harness: synthetic corpora, timed index builds, query batches
// and update batches. Everything is seeded so rows can be regenerated from
// their manifest.

#include <cstdint>
#include <span>
#include <vector>

#include "minsig/analysis.hpp"
#include "minsig/dataset.hpp"
#include "minsig/mobility.hpp"

namespace minsig {

struct SyntheticConfig {
  GridHierarchyConfig grid;
  GeneratorConfig generator;
};

/// Generates traces on a grid hierarchy and packs them into a corpus.
Corpus synthesize_corpus(const SyntheticConfig& config, unsigned threads = 1);

/// Seeded family over the corpus' hash range.
HashFamily corpus_family(const Corpus& corpus, std::uint32_t hash_count, std::uint64_t seed);

struct BuiltIndex {
  HashFamily family;
  SignatureSet signatures;
  MinSigTree tree;
  double signature_seconds = 0;
  double tree_seconds = 0;
  double build_seconds() const noexcept { return signature_seconds + tree_seconds; }
};

BuiltIndex build_index(const Corpus& corpus, std::uint32_t hash_count, std::uint64_t seed,
                       TreeConfig config = {}, unsigned threads = 1);

/// Distinct entity ids drawn without replacement (all ids when count >= size).
std::vector<EntityId> sample_queries(std::size_t corpus_size, std::size_t count, std::uint64_t seed);

struct QueryBatch {
  std::vector<QueryResult> results;
  double mean_pe = 0;
  double pe_stderr = 0;
  double p50_micros = 0;
  double p95_micros = 0;
};

/// Runs each query entity against the index. Errors when k >= |E|.
QueryBatch run_queries(const BuiltIndex& built, const Corpus& corpus, std::span<const EntityId> queries,
                       std::size_t k, const Measure& measure, const QueryOptions& options = {},
                       unsigned threads = 1);

struct UpdateTiming {
  double existing_fraction = 0;
  std::size_t batch = 0;
  double seconds = 0;
  // Tree update and stale-node refresh only; hashing excluded.
  double index_seconds = 0;
  UpdateStats stats;
  std::size_t refreshed = 0;
};

/// Applies a batch where `existing_fraction` of the entities already exist
/// (fresh traces for them) and the rest are new. Times signature
/// computation, the tree update and the refresh of stale nodes. Modifies
/// `built` and `corpus`.
UpdateTiming timed_update(BuiltIndex& built, Corpus& corpus, double existing_fraction, std::size_t batch,
                          const IMParams& params, std::uint64_t seed, unsigned threads = 1);

/// Mean and standard error.
std::pair<double, double> mean_stderr(std::span<const double> values);
/// Ordinary least squares y = a + b x with its R^2.
struct LinearFit {
  double intercept = 0;
  double slope = 0;
  double r2 = 0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// PE model parameters read off a corpus: n, t and the degree estimates
/// from `sample` queries. n_c is the bound-derived count.
PEConfig pe_config_for(const Corpus& corpus, std::uint32_t hash_count, std::size_t k, const Measure& measure,
                       std::size_t sample, std::uint64_t seed, std::uint32_t sub_ranges = 64);

}  // namespace minsig
