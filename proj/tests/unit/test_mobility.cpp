#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixture.hpp"

using namespace minsig;

namespace {

SpIndex grid(std::uint32_t side, int levels) {
  GridHierarchyConfig c;
  c.side_length = side;
  c.levels = levels;
  return generate_grid_hierarchy(c);
}

}  // namespace

TEST_CASE("truncated power law sampler") {
  const TruncatedPowerLaw law(1.8, 24);
  double total = 0;
  for (std::uint32_t k = 1; k <= 24; ++k) {
    total += law.probability(k);
    if (k > 1) CHECK(law.probability(k) < law.probability(k - 1));
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(law.probability(0) == 0.0);
  CHECK(law.probability(25) == 0.0);
  CHECK(law.probability(2) / law.probability(1) == doctest::Approx(std::pow(2.0, -1.8)));
  CHECK_THROWS_AS(TruncatedPowerLaw(1.0, 0), Error);
}

TEST_CASE("simulated traces hold one base cell per temporal unit") {
  const auto idx = grid(16, 4);
  IMParams p;
  p.duration = 48;
  const auto cells = simulate_entity(p, idx, 5);
  REQUIRE(cells.size() == 48);
  for (std::uint32_t t = 0; t < 48; ++t) {
    CHECK(cells[t].time == t);
    CHECK(idx.is_base(cells[t].unit));
  }
  CHECK(simulate_entity(p, idx, 5) == cells);
  CHECK_THROWS_AS(simulate_entity(p, fixture::toy_index(), 5), Error);
  IMParams bad;
  bad.rho = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("no exploration leaves one location") {
  const auto idx = grid(16, 3);
  IMParams p;
  p.rho = 0;
  p.duration = 200;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::set<UnitId> units;
    for (const auto& c : simulate_entity(p, idx, s)) units.insert(c.unit);
    CHECK(units.size() == 1);
  }
}

TEST_CASE("dwell lengths follow the configured exponent") {
  const auto idx = grid(16, 3);
  IMParams p;
  p.duration = 5000;
  SimulationLog log;
  for (std::uint64_t s = 0; s < 160; ++s) simulate_entity(p, idx, derive_seed(3, "dwell", s), &log);
  REQUIRE(log.dwell_lengths.size() >= 100000);
  std::vector<double> counts(p.max_dwell + 1, 0);
  for (auto d : log.dwell_lengths) counts[d] += 1;
  std::vector<double> k, freq;
  // The largest length also absorbs stays cut short by the end of the trace.
  for (std::uint32_t d = 1; d < p.max_dwell; ++d) {
    k.push_back(d);
    freq.push_back(counts[d]);
  }
  const double slope = loglog_slope(k, freq);
  MESSAGE("dwell slope " << slope);
  CHECK(std::abs(-slope - (1.0 + p.beta)) <= 0.15);
}

TEST_CASE("exploration probability decays with visited count") {
  const auto idx = grid(32, 3);
  for (double gamma : {0.0, 0.2, 0.6}) {
    IMParams p;
    p.gamma = gamma;
    p.duration = 400;
    SimulationLog log;
    for (std::uint64_t s = 0; s < 3000; ++s) simulate_entity(p, idx, derive_seed(7, "explore", s), &log);
    std::map<std::uint32_t, std::pair<double, double>> bins;  // S -> (explored, total)
    for (const auto& [visited, explored] : log.jumps) {
      bins[visited].first += explored;
      bins[visited].second += 1;
    }
    std::size_t checked = 0;
    for (const auto& [s, v] : bins) {
      if (v.second < 500) continue;
      CAPTURE(gamma);
      CAPTURE(s);
      CHECK(std::abs(v.first / v.second - p.rho * std::pow(static_cast<double>(s), -gamma)) <= 0.05);
      ++checked;
    }
    CHECK(checked >= 3);
  }
}

TEST_CASE("visit frequencies decay with rank") {
  const auto idx = grid(32, 3);
  IMParams p;
  p.duration = 2000;
  SimulationLog log;
  std::vector<double> by_rank(400, 0);
  for (std::uint64_t s = 0; s < 100; ++s) {
    SimulationLog one;
    simulate_entity(p, idx, derive_seed(9, "rank", s), &one);
    std::sort(one.visit_counts.rbegin(), one.visit_counts.rend());
    for (std::size_t r = 0; r < one.visit_counts.size() && r < by_rank.size(); ++r) by_rank[r] += one.visit_counts[r];
  }
  std::vector<double> rank, freq;
  for (std::size_t r = 0; r < 30; ++r) {
    rank.push_back(static_cast<double>(r + 1));
    freq.push_back(by_rank[r]);
  }
  const double slope = loglog_slope(rank, freq);
  MESSAGE("rank-frequency exponent " << -slope << " with zeta " << p.zeta);
  CHECK(slope < 0);
}

TEST_CASE("emergent growth exponents") {
  const auto idx = grid(64, 3);
  IMParams p;
  p.duration = 240;
  GeneratorConfig g;
  g.entities = 1000;
  g.params = p;
  g.seed = 4;
  const auto traces = generate_traces(g, idx);
  const auto ex = empirical_exponents(traces, idx);
  MESSAGE("mu " << ex.mu << " nu " << ex.nu);
  CHECK(ex.mu > 0);
  CHECK(ex.mu < 1);
  CHECK(ex.nu > 0);
  CHECK(ex.nu < 2);

  IMParams still = p;
  still.rho = 0;
  g.params = still;
  const auto stationary = empirical_exponents(generate_traces(g, idx), idx);
  CHECK(std::abs(stationary.mu) < 1e-9);
  CHECK(std::abs(stationary.nu) < 1e-9);

  // One cell to the right per unit.
  std::vector<std::vector<STCell>> ballistic(3);
  for (TimeIndex t = 0; t < 40; ++t)
    for (std::uint32_t row = 0; row < 3; ++row) ballistic[row].push_back({t, idx.base_unit(row * 64 + t)});
  const auto b = empirical_exponents(ballistic, idx);
  CHECK(b.nu == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(b.mu == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<std::vector<STCell>> short_traces{{{0, idx.base_unit(0)}}};
  CHECK_THROWS_AS(empirical_exponents(short_traces, idx), Error);
}

TEST_CASE("generation is deterministic and thread independent") {
  const auto idx = grid(16, 4);
  GeneratorConfig g;
  g.entities = 300;
  g.seed = 12;
  const auto one = generate_traces(g, idx, 1);
  const auto four = generate_traces(g, idx, 4);
  CHECK(one == four);
  std::ostringstream a, b;
  write_trace_jsonl(one, idx, g, a);
  write_trace_jsonl(four, idx, g, b);
  CHECK(a.str() == b.str());
  CHECK(!a.str().empty());
  g.entities = 0;
  std::ostringstream empty;
  write_trace_jsonl(generate_traces(g, idx), idx, g, empty);
  CHECK(empty.str().empty());
  CHECK(generated_entity_name(7, 1000) == "e007");
}

TEST_CASE("records round trip through ingestion") {
  const auto idx = grid(16, 4);
  GeneratorConfig g;
  g.entities = 50;
  g.seed = 3;
  const auto traces = generate_traces(g, idx);
  std::stringstream jsonl;
  write_trace_jsonl(traces, idx, g, jsonl);
  const auto records = read_trace_records(jsonl, g.unit_seconds);
  const auto corpus = ingest(records, idx, g.unit_seconds);
  const auto direct = synthesize_corpus(SyntheticConfig{GridHierarchyConfig{}, g});
  REQUIRE(corpus.size() == direct.size());
  for (EntityId e = 0; e < corpus.size(); ++e) CHECK(corpus.sequence(e) == direct.sequence(e));
  CHECK(corpus.fingerprint() == direct.fingerprint());
}

TEST_CASE("visit probability") {
  const auto idx = grid(16, 4);
  IMParams p;
  CHECK(visit_probability(idx, idx.root(), 5, 1.0, p) == 1.0);
  UnitId quad = idx.root();
  // A four-cell unit away from the border.
  for (int l = 1; l <= idx.height() && quad == idx.root(); ++l)
    for (auto u : idx.units_at_level(l)) {
      const auto r = idx.base_range(u);
      if (r.size() != 4) continue;
      const auto [x, y] = idx.grid_xy(idx.base_unit(r.begin));
      if (x >= 4 && x <= 10 && y >= 4 && y <= 10) {
        quad = u;
        break;
      }
    }
  REQUIRE(quad != idx.root());
  CHECK(visit_probability(idx, quad, 0, 1.0, p) == doctest::Approx(4.0 / 256.0));

  GeneratorConfig g;
  g.entities = 4000;
  g.params.duration = 24;
  g.seed = 8;
  const auto traces = generate_traces(g, idx);
  const double nu = empirical_exponents(traces, idx).nu;
  const auto range = idx.base_range(quad);
  double prev = 0;
  for (TimeIndex t : {1u, 6u, 12u, 24u}) {
    const double model = visit_probability(idx, quad, t, nu, p);
    CHECK(model >= 4.0 / 256.0);
    CHECK(model <= 1.0);
    CHECK(model >= prev);
    prev = model;
    double hits = 0;
    for (const auto& tr : traces) {
      bool hit = false;
      for (const auto& c : tr) {
        if (c.time > t) break;
        const auto pos = idx.base_position(c.unit);
        hit = hit || (pos >= range.begin && pos < range.end);
      }
      hits += hit;
    }
    const double observed = hits / static_cast<double>(traces.size());
    MESSAGE("t " << t << " model " << model << " simulated " << observed);
    CHECK(std::abs(model - observed) <= 0.1);
  }
}
