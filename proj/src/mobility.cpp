#include "minsig/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include <Eigen/Dense>
#include "json.hpp"

#include "minsig/parallel.hpp"

namespace minsig {

void IMParams::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0; };
  if (!positive(alpha) || !positive(beta) || !positive(zeta))
    fail(ErrorCode::invalid_argument, "alpha, beta and zeta must be positive");
  if (!std::isfinite(gamma) || gamma < 0) fail(ErrorCode::invalid_argument, "gamma must be >= 0");
  if (!std::isfinite(rho) || rho < 0 || rho > 1) fail(ErrorCode::invalid_argument, "rho must lie in [0, 1]");
  if (max_dwell < 1) fail(ErrorCode::invalid_argument, "max_dwell must be >= 1");
  if (duration < 1) fail(ErrorCode::invalid_argument, "duration must be >= 1");
}

TruncatedPowerLaw::TruncatedPowerLaw(double exponent, std::uint32_t max) {
  if (max < 1) fail(ErrorCode::invalid_argument, "power law support must be nonempty");
  cdf_.resize(max);
  double total = 0;
  for (std::uint32_t k = 1; k <= max; ++k) cdf_[k - 1] = total += std::pow(static_cast<double>(k), -exponent);
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

std::uint32_t TruncatedPowerLaw::operator()(std::mt19937_64& rng) const {
  const double u = unit_uniform(rng);
  return static_cast<std::uint32_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()) + 1;
}

double TruncatedPowerLaw::probability(std::uint32_t k) const {
  if (k < 1 || k > cdf_.size()) return 0.0;
  return cdf_[k - 1] - (k > 1 ? cdf_[k - 2] : 0.0);
}

namespace {

std::uint32_t require_grid(const SpIndex& index) {
  const auto side = index.grid_side();
  if (!side) fail(ErrorCode::invalid_argument, "mobility needs a grid hierarchy");
  return *side;
}

}  // namespace

std::vector<STCell> simulate_entity(const IMParams& params, const SpIndex& index, std::uint64_t seed,
                                    SimulationLog* log) {
  params.validate();
  const auto side = require_grid(index);
  const std::uint32_t n = side * side;
  std::mt19937_64 rng(seed);
  const TruncatedPowerLaw dwell(1.0 + params.beta, params.max_dwell);

  std::uint32_t pos = static_cast<std::uint32_t>(unit_uniform(rng) * n);
  std::unordered_map<std::uint32_t, std::uint32_t> counts{{pos, 1}};
  std::vector<std::uint32_t> first_seen{pos};  // visited cells by first visit
  std::vector<STCell> cells;
  cells.reserve(params.duration);

  auto jump_target = [&](std::uint32_t from) {
    const double x = from % side, y = from / side;
    double tx = x, ty = y;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double r = std::pow(1.0 - unit_uniform(rng), -1.0 / params.alpha);
      const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
      tx = std::round(x + r * std::cos(theta));
      ty = std::round(y + r * std::sin(theta));
      const bool inside = tx >= 0 && ty >= 0 && tx < side && ty < side;
      if (inside && (tx != x || ty != y)) break;
    }
    tx = std::clamp(tx, 0.0, static_cast<double>(side - 1));
    ty = std::clamp(ty, 0.0, static_cast<double>(side - 1));
    return static_cast<std::uint32_t>(ty) * side + static_cast<std::uint32_t>(tx);
  };

  std::vector<std::uint32_t> ranked;
  std::uint32_t time = 0;
  while (time < params.duration) {
    const auto stay = std::min(dwell(rng), params.duration - time);
    if (log) log->dwell_lengths.push_back(stay);
    for (std::uint32_t k = 0; k < stay; ++k) cells.push_back({time + k, index.base_unit(pos)});
    time += stay;
    if (time >= params.duration) break;

    const auto visited = static_cast<std::uint32_t>(first_seen.size());
    const double p_new = params.rho * std::pow(static_cast<double>(visited), -params.gamma);
    const bool explore = unit_uniform(rng) < p_new;
    if (log) log->jumps.emplace_back(visited, explore);
    if (explore) {
      pos = jump_target(pos);
      if (counts.find(pos) == counts.end()) first_seen.push_back(pos);
    } else if (visited > 1) {
      // Return to the y-th most visited other cell with weight y^-zeta.
      ranked.clear();
      for (auto c : first_seen)
        if (c != pos) ranked.push_back(c);
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return counts[a] > counts[b]; });
      double total = 0;
      for (std::size_t y = 1; y <= ranked.size(); ++y) total += std::pow(static_cast<double>(y), -params.zeta);
      double u = unit_uniform(rng) * total;
      std::size_t pick = 0;
      for (; pick + 1 < ranked.size(); ++pick) {
        u -= std::pow(static_cast<double>(pick + 1), -params.zeta);
        if (u < 0) break;
      }
      pos = ranked[pick];
    }
    ++counts[pos];
  }
  if (log)
    for (auto c : first_seen) log->visit_counts.push_back(counts[c]);
  return cells;
}

std::vector<std::vector<STCell>> generate_traces(const GeneratorConfig& config, const SpIndex& index,
                                                 unsigned threads) {
  config.params.validate();
  require_grid(index);
  std::vector<std::vector<STCell>> out(config.entities);
  parallel_for(config.entities, threads, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) out[i] = simulate_entity(config.params, index, derive_seed(config.seed, "entity", i));
  });
  return out;
}

std::string generated_entity_name(std::size_t i, std::size_t total) {
  const auto width = std::max<std::size_t>(1, std::to_string(total > 0 ? total - 1 : 0).size());
  auto digits = std::to_string(i);
  return "e" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::vector<RawRecord> to_records(std::span<const STCell> cells, const std::string& entity,
                                  const SpIndex& index, std::int64_t epoch, std::int64_t unit_seconds) {
  std::vector<RawRecord> out;
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i + 1;
    while (j < cells.size() && cells[j].unit == cells[i].unit && cells[j].time == cells[j - 1].time + 1) ++j;
    out.push_back({entity, index.name(cells[i].unit), epoch + static_cast<std::int64_t>(cells[i].time) * unit_seconds,
                   epoch + static_cast<std::int64_t>(cells[j - 1].time + 1) * unit_seconds, 0});
    i = j;
  }
  return out;
}

void write_trace_jsonl(std::span<const std::vector<STCell>> traces, const SpIndex& index,
                       const GeneratorConfig& config, std::ostream& out) {
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto name = generated_entity_name(i, traces.size());
    for (const auto& r : to_records(traces[i], name, index, config.epoch, config.unit_seconds)) {
      const nlohmann::ordered_json j{{"entity", r.entity}, {"location", r.location}, {"start", r.start}, {"end", r.end}};
      out << j.dump() << '\n';
    }
  }
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return 0.0;
  Eigen::MatrixXd A(lx.size(), 2);
  A.col(0) = Eigen::Map<Eigen::VectorXd>(lx.data(), static_cast<Eigen::Index>(lx.size()));
  A.col(1).setOnes();
  const Eigen::Map<Eigen::VectorXd> b(ly.data(), static_cast<Eigen::Index>(ly.size()));
  return A.colPivHouseholderQr().solve(b)[0];
}

Exponents empirical_exponents(std::span<const std::vector<STCell>> traces, const SpIndex& index) {
  require_grid(index);
  std::size_t horizon = 0;
  for (const auto& t : traces) horizon = std::max(horizon, t.size());
  if (horizon < 10) fail(ErrorCode::invalid_argument, "need at least 10 time points to fit exponents");
  std::vector<double> distinct(horizon, 0), msd(horizon, 0), samples(horizon, 0);
  for (const auto& trace : traces) {
    if (trace.empty()) continue;
    const auto [x0, y0] = index.grid_xy(trace.front().unit);
    std::vector<UnitId> seen;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      if (std::find(seen.begin(), seen.end(), trace[k].unit) == seen.end()) seen.push_back(trace[k].unit);
      const auto [x, y] = index.grid_xy(trace[k].unit);
      const double dx = static_cast<double>(x) - x0, dy = static_cast<double>(y) - y0;
      distinct[k] += static_cast<double>(seen.size());
      msd[k] += dx * dx + dy * dy;
      samples[k] += 1;
    }
  }
  std::vector<double> t(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    t[k] = static_cast<double>(k + 1);
    if (samples[k] > 0) {
      distinct[k] /= samples[k];
      msd[k] /= samples[k];
    }
  }
  // Displacement after k elapsed units sits at index k.
  std::vector<double> t_msd(t.begin(), t.end() - 1), msd_tail(msd.begin() + 1, msd.end());
  return {loglog_slope(t, distinct), loglog_slope(t_msd, msd_tail)};
}

double exit_probability(const SpIndex& index, UnitId unit, double alpha) {
  const auto side = require_grid(index);
  const auto range = index.base_range(unit);
  if (range.size() == index.base_count()) return 0.0;
  double total = 0;
  for (auto p = range.begin; p < range.end; ++p) {
    const double x = p % side, y = p / side;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::uint32_t q = 0; q < index.base_count(); ++q) {
      if (q >= range.begin && q < range.end) continue;
      const double dx = static_cast<double>(q % side) - x, dy = static_cast<double>(q / side) - y;
      nearest = std::min(nearest, std::sqrt(dx * dx + dy * dy));
    }
    total += std::min(1.0, std::pow(nearest, -alpha));
  }
  return total / range.size();
}

namespace {

// Mass of an isotropic Gaussian (per-axis variance var) centred at (cx, cy)
// over the unit square of cell (x, y).
double cell_mass(double cx, double cy, double var, std::uint32_t x, std::uint32_t y) {
  const double s = std::sqrt(2.0 * var);
  auto axis = [&](double c, double lo) { return 0.5 * (std::erf((lo + 0.5 - c) / s) - std::erf((lo - 0.5 - c) / s)); };
  return axis(cx, x) * axis(cy, y);
}

}  // namespace

double visit_probability(const SpIndex& index, UnitId unit, double t, double nu, const IMParams& params) {
  const auto side = require_grid(index);
  if (unit >= index.unit_count()) fail(ErrorCode::unknown_unit, "unknown unit");
  if (t < 0) fail(ErrorCode::invalid_argument, "duration must be nonnegative");
  const auto target = index.base_range(unit);
  const double n = static_cast<double>(index.base_count());
  const double start = target.size() / n;
  if (t < 1 || unit == index.root() || target.size() == index.base_count()) return std::min(1.0, start);

  const int level = index.level(unit);
  double reach = 0;
  for (auto other : index.units_at_level(level)) {
    if (other == unit) continue;
    const auto src = index.base_range(other);
    double cx = 0, cy = 0;
    for (auto p = src.begin; p < src.end; ++p) {
      cx += p % side;
      cy += p / side;
    }
    cx /= src.size();
    cy /= src.size();
    const double leave = exit_probability(index, other, params.alpha);
    double best = 0;
    for (double tau = 1; tau <= t; tau += 1) {
      const double var = std::pow(tau, nu);
      double mass = 0;
      for (auto p = target.begin; p < target.end; ++p) mass += cell_mass(cx, cy, var, p % side, p / side);
      best = std::max(best, mass);
    }
    reach += (src.size() / n) * leave * best;
  }
  return std::clamp(start + reach, start, 1.0);
}

}  // namespace minsig
