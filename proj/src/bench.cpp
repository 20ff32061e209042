#include "minsig/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "minsig/parallel.hpp"

namespace minsig {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

Corpus synthesize_corpus(const SyntheticConfig& config, unsigned threads) {
  const auto index = generate_grid_hierarchy(config.grid, config.generator.seed);
  const auto traces = generate_traces(config.generator, index, threads);
  // Generated times start at the epoch's temporal unit.
  const auto origin = to_time_index(config.generator.epoch, config.generator.unit_seconds);
  std::vector<std::vector<STCell>> shifted(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    shifted[i] = traces[i];
    for (auto& c : shifted[i]) c.time += origin;
  }
  return corpus_from_cells(index, shifted, config.generator.unit_seconds);
}

HashFamily corpus_family(const Corpus& corpus, std::uint32_t hash_count, std::uint64_t seed) {
  return HashFamily(hash_count, seed, corpus.hash_range());
}

BuiltIndex build_index(const Corpus& corpus, std::uint32_t hash_count, std::uint64_t seed, TreeConfig config,
                       unsigned threads) {
  BuiltIndex out;
  out.family = corpus_family(corpus, hash_count, seed);
  auto t0 = Clock::now();
  out.signatures = compute_signature_set(corpus.sequences(), out.family, corpus.index(), threads);
  out.signature_seconds = seconds_since(t0);
  t0 = Clock::now();
  out.tree = build_tree(out.signatures, out.family.header(), config, threads);
  out.tree_seconds = seconds_since(t0);
  return out;
}

std::vector<EntityId> sample_queries(std::size_t corpus_size, std::size_t count, std::uint64_t seed) {
  std::vector<EntityId> ids(corpus_size);
  std::iota(ids.begin(), ids.end(), EntityId{0});
  if (count >= corpus_size) return ids;
  std::mt19937_64 rng(derive_seed(seed, "queries"));
  // Partial Fisher-Yates with the platform-independent uniform.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(corpus_size - i));
    std::swap(ids[i], ids[std::min(j, corpus_size - 1)]);
  }
  ids.resize(count);
  return ids;
}

QueryBatch run_queries(const BuiltIndex& built, const Corpus& corpus, std::span<const EntityId> queries,
                       std::size_t k, const Measure& measure, const QueryOptions& options, unsigned threads) {
  if (k >= corpus.size()) fail(ErrorCode::infeasible, "k must be smaller than the corpus size");
  QueryBatch batch;
  batch.results.resize(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) {
      const QueryRequest req{&corpus.sequence(queries[i]), queries[i], k};
      batch.results[i] = topk_search(built.tree, corpus.sequences(), built.family, corpus.index(), req, measure, options);
    }
  });
  std::vector<double> pe, micros;
  for (const auto& r : batch.results) {
    pe.push_back(r.stats.pe);
    micros.push_back(r.stats.wall_micros);
  }
  std::tie(batch.mean_pe, batch.pe_stderr) = mean_stderr(pe);
  batch.p50_micros = percentile(micros, 0.5);
  batch.p95_micros = percentile(micros, 0.95);
  return batch;
}

UpdateTiming timed_update(BuiltIndex& built, Corpus& corpus, double existing_fraction, std::size_t batch,
                          const IMParams& params, std::uint64_t seed, unsigned threads) {
  if (existing_fraction < 0 || existing_fraction > 1) fail(ErrorCode::invalid_argument, "existing fraction must lie in [0, 1]");
  const auto existing = static_cast<std::size_t>(std::llround(existing_fraction * static_cast<double>(batch)));
  if (existing > corpus.size()) fail(ErrorCode::infeasible, "batch holds more existing entities than the corpus");
  const auto targets = sample_queries(corpus.size(), existing, derive_seed(seed, "update-existing"));
  const auto origin = corpus.first_time();

  std::vector<EntityId> ids;
  for (std::size_t i = 0; i < batch; ++i) {
    auto cells = simulate_entity(params, corpus.index(), derive_seed(seed, "update-trace", i));
    for (auto& c : cells) c.time += origin;
    const std::string name =
        i < existing ? corpus.name(targets[i]) : "new" + std::to_string(seed) + "_" + std::to_string(i);
    ids.push_back(corpus.upsert(name, cells));
  }
  std::vector<CellSequence> seqs;
  for (auto e : ids) seqs.push_back(corpus.sequence(e));

  // Growing the in-memory signature store is bookkeeping, not index work.
  for (auto& level : built.signatures.levels) {
    const auto old_cols = level.cols();
    if (static_cast<std::size_t>(old_cols) >= corpus.size()) continue;
    level.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(corpus.size()));
    level.rightCols(level.cols() - old_cols).setZero();
  }

  UpdateTiming out;
  out.existing_fraction = existing_fraction;
  out.batch = batch;
  const auto t0 = Clock::now();
  const auto sigs = compute_signature_set(seqs, built.family, corpus.index(), threads);
  std::vector<std::pair<EntityId, SignatureList>> updates;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto sig = sigs.entity(i);
    built.signatures.set_entity(ids[i], sig);
    updates.emplace_back(ids[i], std::move(sig));
  }
  const auto t1 = Clock::now();
  out.stats = built.tree.bulk_update(updates);
  out.refreshed = built.tree.refresh_stale(built.signatures);
  out.index_seconds = seconds_since(t1);
  out.seconds = seconds_since(t0);
  return out;
}

std::pair<double, double> mean_stderr(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0;
  for (auto v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::invalid_argument, "need >= 2 paired values");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  A.col(0).setOnes();
  A.col(1) = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  const Eigen::Map<const Eigen::VectorXd> b(y.data(), n);
  const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  LinearFit fit{coef[0], coef[1], 1.0};
  const double ss_tot = (b.array() - b.mean()).square().sum();
  const double ss_res = (A * coef - b).squaredNorm();
  if (ss_tot > 0) fit.r2 = 1.0 - ss_res / ss_tot;
  return fit;
}

PEConfig pe_config_for(const Corpus& corpus, std::uint32_t hash_count, std::size_t k, const Measure& measure,
                       std::size_t sample, std::uint64_t seed, std::uint32_t sub_ranges) {
  PEConfig c;
  c.n = corpus.index().base_count();
  c.t = corpus.temporal_units();
  c.hash_count = hash_count;
  c.sub_ranges = sub_ranges;
  const auto queries = sample_queries(corpus.size(), sample, derive_seed(seed, "pe-sample"));
  const auto est = estimate_degree_parameters(corpus.sequences(), queries, k, measure);
  c.trace_size = est.trace_size;
  c.min_shared = std::max<std::uint32_t>(1, est.bound_shared);
  c.expected_degree = est.expected_degree;
  return c;
}

}  // namespace minsig
