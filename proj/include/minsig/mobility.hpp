#pragma once

// Individual mobility model on a grid hierarchy: power-law dwell times,
// exploration with decaying probability and power-law jump lengths, and
// preferential return to frequently visited cells.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "minsig/hierarchy.hpp"
#include "minsig/traces.hpp"

namespace minsig {

struct IMParams {
  double alpha = 0.6;  // jump length exponent
  double beta = 0.8;   // dwell exponent
  double gamma = 0.2;  // exploration decay
  double rho = 0.6;    // exploration scale
  double zeta = 1.2;   // return rank exponent
  std::uint32_t max_dwell = 8;   // temporal units
  std::uint32_t duration = 24;   // temporal units simulated per entity

  void validate() const;
};

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF sampler over k = 1..max with P(k) proportional to k^-exponent.
class TruncatedPowerLaw {
 public:
  TruncatedPowerLaw(double exponent, std::uint32_t max);
  std::uint32_t operator()(std::mt19937_64& rng) const;
  double probability(std::uint32_t k) const;

 private:
  std::vector<double> cdf_;
};

struct SimulationLog {
  std::vector<std::uint32_t> dwell_lengths;
  /// (distinct cells visited before the jump, jump was exploratory)
  std::vector<std::pair<std::uint32_t, bool>> jumps;
  std::vector<std::uint32_t> visit_counts;  // per visited cell, unordered
};

/// One base cell per temporal unit, times 0..duration-1, positions are base
/// units of `index` (which must carry a grid). `log` collects diagnostics.
std::vector<STCell> simulate_entity(const IMParams& params, const SpIndex& index, std::uint64_t seed,
                                    SimulationLog* log = nullptr);

struct GeneratorConfig {
  std::size_t entities = 10000;
  IMParams params;
  std::int64_t epoch = 1700006400;  // first temporal unit, seconds
  std::int64_t unit_seconds = 3600;
  std::uint64_t seed = 1;
};

/// Simulated base cells per entity, entity i seeded from (seed, i).
std::vector<std::vector<STCell>> generate_traces(const GeneratorConfig& config, const SpIndex& index,
                                                 unsigned threads = 1);
/// Entity names used by the generator, zero padded so they sort numerically.
std::string generated_entity_name(std::size_t i, std::size_t total);
/// Consecutive hours in one cell become one record.
std::vector<RawRecord> to_records(std::span<const STCell> cells, const std::string& entity,
                                  const SpIndex& index, std::int64_t epoch, std::int64_t unit_seconds);
/// JSON lines, one record per line.
void write_trace_jsonl(std::span<const std::vector<STCell>> traces, const SpIndex& index,
                       const GeneratorConfig& config, std::ostream& out);

/// Fitted log-log slopes of ensemble-mean distinct cells S(t) and mean
/// squared displacement MSD(t). Traces are time-ordered cells with one
/// position per temporal unit. Errors: fewer than 10 time points.
struct Exponents {
  double mu = 0;
  double nu = 0;
};
Exponents empirical_exponents(std::span<const std::vector<STCell>> traces, const SpIndex& index);
/// Least-squares slope of log y on log x over points with y > 0.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Probability that a jump from a uniform cell of `unit` leaves it.
double exit_probability(const SpIndex& index, UnitId unit, double alpha);
/// Probability that an entity has visited `unit` within `t` temporal units:
/// the chance of starting inside plus, for every other same-level unit, the
/// chance of starting there, leaving, and a diffusive spread with variance
/// tau^nu covering `unit` for some tau <= t. Clamped to [start term, 1].
double visit_probability(const SpIndex& index, UnitId unit, double t, double nu, const IMParams& params);

}  // namespace minsig
