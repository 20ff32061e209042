// minsig: generate, ingest, index and query digital traces.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "minsig/bench.hpp"
#include "minsig/index_io.hpp"
#include "minsig/parallel.hpp"

using namespace minsig;
using nlohmann::ordered_json;

namespace {

struct Global {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::uint32_t hashes = 1024;
  bool full_signatures = false;
};

struct MeasureFlags {
  std::string variant = "adm";
  double u = 1.0;
  double v = 1.0;
  std::string weights;

  MeasureParams params() const {
    MeasureParams p;
    p.variant = parse_measure_variant(variant);
    p.level_exponent = u;
    p.duration_exponent = v;
    if (!weights.empty()) p.level_weights = parse_weights(weights);
    return p;
  }
  void add_to(CLI::App* cmd) {
    cmd->add_option("--measure", variant, "adm, dice, jaccard or cosine")->capture_default_str();
    cmd->add_option("--u", u, "level exponent")->capture_default_str();
    cmd->add_option("--v", v, "duration exponent")->capture_default_str();
    cmd->add_option("--weights", weights, "level weights w1,...,wm (level 1 first)");
  }
  ordered_json json() const { return {{"measure", variant}, {"u", u}, {"v", v}, {"weights", weights}}; }
};

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) fail(ErrorCode::invalid_argument, "bad list item '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorCode::invalid_argument, "empty list");
  return out;
}

void write_manifest(const std::string& path, const std::string& command, const Global& g, ordered_json config) {
  ordered_json m;
  m["command"] = command;
  m["seed"] = g.seed;
  m["threads"] = g.threads;
  m["hashes"] = g.hashes;
  m["store_full_signatures"] = g.full_signatures;
  m["config"] = std::move(config);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path);
  out << m.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path);
  return out;
}

struct GridFlags {
  std::string grid = "16,1";
  int levels = 4;
  double a = 2.0;
  double b = 2.0;

  GridHierarchyConfig config() const {
    const auto parts = parse_list<std::uint32_t>(grid);
    if (parts.size() != 2) fail(ErrorCode::invalid_argument, "--grid expects L,Lbsu");
    GridHierarchyConfig c;
    c.side_length = parts[0];
    c.base_side = parts[1];
    c.levels = levels;
    c.width_exponent = a;
    c.density_exponent = b;
    c.validate();
    return c;
  }
  void add_to(CLI::App* cmd) {
    cmd->add_option("--grid", grid, "area side length and base-unit side, L,Lbsu")->capture_default_str();
    cmd->add_option("--levels", levels, "hierarchy height m")->capture_default_str();
    cmd->add_option("--a", a, "level width exponent")->capture_default_str();
    cmd->add_option("--b", b, "unit size exponent")->capture_default_str();
  }
  ordered_json json() const { return {{"grid", grid}, {"levels", levels}, {"a", a}, {"b", b}}; }
};

struct MobilityFlags {
  std::size_t entities = 10000;
  double days = 1.0;
  IMParams params;

  GeneratorConfig config(std::uint64_t seed) const {
    GeneratorConfig c;
    c.entities = entities;
    c.params = params;
    c.params.duration = static_cast<std::uint32_t>(std::lround(days * 24.0));
    c.seed = seed;
    c.params.validate();
    return c;
  }
  void add_to(CLI::App* cmd) {
    cmd->add_option("--entities", entities)->capture_default_str();
    cmd->add_option("--days", days, "simulated days of hourly presence")->capture_default_str();
    cmd->add_option("--alpha", params.alpha)->capture_default_str();
    cmd->add_option("--beta", params.beta)->capture_default_str();
    cmd->add_option("--gamma", params.gamma)->capture_default_str();
    cmd->add_option("--rho", params.rho)->capture_default_str();
    cmd->add_option("--zeta", params.zeta)->capture_default_str();
    cmd->add_option("--max-dwell", params.max_dwell, "longest dwell in hours")->capture_default_str();
  }
  ordered_json json() const {
    return {{"entities", entities}, {"days", days},   {"alpha", params.alpha}, {"beta", params.beta},
            {"gamma", params.gamma}, {"rho", params.rho}, {"zeta", params.zeta},   {"max_dwell", params.max_dwell}};
  }
};

StoredIndex load_matching_index(const std::string& path, const Corpus& corpus) {
  auto stored = load_index(path);
  if (stored.dataset_fingerprint != corpus.fingerprint())
    fail(ErrorCode::family_mismatch, "index " + path + " was built for a different dataset");
  return stored;
}

// The family comes from the index header; explicit --seed/--hashes must agree.
HashFamily query_family(const CLI::App& app, const Global& g, const MinSigTree& tree) {
  auto expected = tree.family();
  if (app.count("--seed")) expected.master_seed = g.seed;
  if (app.count("--hashes")) expected.hash_count = g.hashes;
  check_family(tree, expected);
  return HashFamily(expected.hash_count, expected.master_seed, expected.range);
}

void cmd_generate(const Global& g, const MobilityFlags& mob, const GridFlags& grid, const std::string& out,
                  const std::string& hierarchy_out) {
  const auto gcfg = grid.config();
  const auto config = mob.config(g.seed);
  const auto index = generate_grid_hierarchy(gcfg, g.seed);
  const auto traces = generate_traces(config, index, g.threads);
  auto trace_out = open_out(out);
  write_trace_jsonl(traces, index, config, trace_out);
  const auto hpath = hierarchy_out.empty() ? out + ".hierarchy.csv" : hierarchy_out;
  auto hout = open_out(hpath);
  write_hierarchy_csv(index, hout);
  auto cfg = mob.json();
  cfg.update(grid.json());
  cfg["out"] = out;
  cfg["hierarchy_out"] = hpath;
  write_manifest(out + ".manifest.json", "generate", g, cfg);
  std::cout << "generated " << traces.size() << " entities, " << index.base_count() << " base units -> " << out
            << '\n';
}

void cmd_ingest(const Global& g, const std::string& traces, const std::string& hierarchy, std::int64_t unit,
                const std::string& out) {
  const auto corpus = ingest_files(traces, hierarchy, unit);
  save_corpus(corpus, out);
  write_manifest(out + ".manifest.json", "ingest", g,
                 {{"traces", traces}, {"hierarchy", hierarchy}, {"unit_seconds", unit}, {"out", out}});
  std::cout << "ingested " << corpus.size() << " entities, " << corpus.base_cell_count() << " base cells over "
            << corpus.temporal_units() << " temporal units -> " << out << '\n';
}

void cmd_build(const Global& g, const std::string& dataset, const std::string& out) {
  const auto corpus = load_corpus(dataset);
  const auto built = build_index(corpus, g.hashes, g.seed, TreeConfig{g.full_signatures}, g.threads);
  save_index(built.tree, corpus.fingerprint(), out);
  const auto bytes = encode_index(built.tree, corpus.fingerprint()).size();
  write_manifest(out + ".manifest.json", "build", g, {{"dataset", dataset}, {"out", out}});
  std::cout << "build_seconds,signature_seconds,tree_seconds,nodes,index_bytes\n"
            << built.build_seconds() << ',' << built.signature_seconds << ',' << built.tree_seconds << ','
            << built.tree.node_count() << ',' << bytes << '\n';
}

void cmd_query(const CLI::App& app, const Global& g, const std::string& dataset, const std::string& index_path,
               const std::string& entity, std::size_t k, const MeasureFlags& mf, const std::string& scope,
               const std::string& stats_out) {
  const auto corpus = load_corpus(dataset);
  const auto stored = load_matching_index(index_path, corpus);
  const auto family = query_family(app, g, stored.tree);
  const Measure measure(mf.params(), corpus.index().height());
  QueryOptions options;
  if (scope == "base") options.scope = PruneScope::base_cells;
  else if (scope != "all") fail(ErrorCode::invalid_argument, "--scope must be all or base");
  const auto e = corpus.at(entity);
  const QueryRequest req{&corpus.sequence(e), e, k};
  const auto result = topk_search(stored.tree, corpus.sequences(), family, corpus.index(), req, measure, options);
  std::cout << "rank,entity,degree\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i)
    std::cout << i + 1 << ',' << corpus.name(result.ranked[i].entity) << ',' << result.ranked[i].degree << '\n';
  if (!stats_out.empty()) {
    auto out = open_out(stats_out);
    out << "query_id,k,entities_examined,nodes_visited,pe,wall_micros\n"
        << entity << ',' << k << ',' << result.stats.entities_examined << ',' << result.stats.nodes_visited << ','
        << result.stats.pe << ',' << result.stats.wall_micros << '\n';
    auto cfg = mf.json();
    cfg.update({{"dataset", dataset}, {"index", index_path}, {"entity", entity}, {"k", k}, {"scope", scope}});
    write_manifest(stats_out + ".manifest.json", "query", g, cfg);
  }
}

void cmd_update(const Global& g, const std::string& dataset, const std::string& index_path,
                const std::string& traces, const std::string& out_dataset, const std::string& out_index) {
  auto corpus = load_corpus(dataset);
  auto stored = load_matching_index(index_path, corpus);
  const auto& h = stored.tree.family();
  const HashFamily family(h.hash_count, h.master_seed, h.range);
  const auto records = read_trace_file(traces, corpus.unit_seconds());
  // Validates locations with line numbers before touching the corpus.
  const auto fresh = ingest(records, corpus.index(), corpus.unit_seconds());
  std::vector<EntityId> ids;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    std::vector<STCell> cells;
    if (const auto old = corpus.find(fresh.name(static_cast<EntityId>(i))))
      for (auto key : corpus.sequence(*old).base()) cells.push_back(STCell::from_key(key));
    for (auto key : fresh.sequence(static_cast<EntityId>(i)).base()) {
      auto cell = STCell::from_key(key);
      cell.unit = corpus.index().base_unit(fresh.index().base_position(cell.unit));
      cells.push_back(cell);
    }
    ids.push_back(corpus.upsert(fresh.name(static_cast<EntityId>(i)), cells));
  }
  std::vector<CellSequence> seqs;
  for (auto e : ids) seqs.push_back(corpus.sequence(e));
  const auto sigs = compute_signature_set(seqs, family, corpus.index(), g.threads);
  std::vector<std::pair<EntityId, SignatureList>> updates;
  for (std::size_t i = 0; i < ids.size(); ++i) updates.emplace_back(ids[i], sigs.entity(i));
  const auto stats = stored.tree.bulk_update(updates);
  std::size_t refreshed = 0;
  if (stored.tree.stale_count() > 0) {
    const auto all = compute_signature_set(corpus.sequences(), family, corpus.index(), g.threads);
    refreshed = stored.tree.refresh_stale(all);
  }
  const auto ds_out = out_dataset.empty() ? dataset : out_dataset;
  const auto ix_out = out_index.empty() ? index_path : out_index;
  save_corpus(corpus, ds_out);
  save_index(stored.tree, corpus.fingerprint(), ix_out);
  write_manifest(ix_out + ".manifest.json", "update", g,
                 {{"dataset", dataset}, {"index", index_path}, {"traces", traces}, {"out_dataset", ds_out},
                  {"out_index", ix_out}});
  std::cout << "entities_removed,entities_inserted,nodes_touched,nodes_created,nodes_removed,refreshed\n"
            << stats.entities_removed << ',' << stats.entities_inserted << ',' << stats.nodes_touched << ','
            << stats.nodes_created << ',' << stats.nodes_removed << ',' << refreshed << '\n';
}

struct BenchFlags {
  std::string hashes = "8,64,256,1024,2048";
  std::string ks = "10";
  std::size_t queries = 100;
  std::string sweep;
  std::string values;
  std::string mixes = "1.0,0.7,0.4";
  std::size_t update_batch = 1000;
  std::string out;
};

void cmd_bench(const Global& g, const BenchFlags& bf, const MobilityFlags& mob, const GridFlags& grid,
               const MeasureFlags& mf) {
  const auto hash_list = parse_list<std::uint32_t>(bf.hashes);
  const auto k_list = parse_list<std::size_t>(bf.ks);
  const auto mixes = parse_list<double>(bf.mixes);
  std::vector<double> sweep_values{0.0};
  if (!bf.sweep.empty()) sweep_values = parse_list<double>(bf.values);

  auto out = open_out(bf.out);
  out << "sweep,value,hashes,k,queries,mean_pe,pe_stderr,p50_micros,p95_micros,build_seconds,index_bytes,"
         "dataset_bytes,update_mix,update_seconds,update_index_seconds\n";
  for (double value : sweep_values) {
    SyntheticConfig sc{grid.config(), mob.config(g.seed)};
    auto& p = sc.generator.params;
    if (bf.sweep == "alpha") p.alpha = value;
    else if (bf.sweep == "beta") p.beta = value;
    else if (bf.sweep == "gamma") p.gamma = value;
    else if (bf.sweep == "rho") p.rho = value;
    else if (bf.sweep == "zeta") p.zeta = value;
    else if (bf.sweep == "a") sc.grid.width_exponent = value;
    else if (bf.sweep == "b") sc.grid.density_exponent = value;
    else if (bf.sweep == "m") sc.grid.levels = static_cast<int>(value);
    else if (!bf.sweep.empty()) fail(ErrorCode::invalid_argument, "unknown sweep parameter '" + bf.sweep + "'");
    p.validate();
    sc.grid.validate();
    const auto corpus = synthesize_corpus(sc, g.threads);
    const auto dataset_bytes = encode_corpus(corpus).size();
    const Measure measure(mf.params(), corpus.index().height());
    const auto queries = sample_queries(corpus.size(), bf.queries, g.seed);
    for (auto k : k_list)
      if (k >= corpus.size()) fail(ErrorCode::infeasible, "k must be smaller than the corpus size");
    for (auto nh : hash_list) {
      const auto built = build_index(corpus, nh, g.seed, TreeConfig{g.full_signatures}, g.threads);
      const auto index_bytes = encode_index(built.tree, corpus.fingerprint()).size();
      for (auto k : k_list) {
        const auto batch = run_queries(built, corpus, queries, k, measure, {}, g.threads);
        out << bf.sweep << ',' << value << ',' << nh << ',' << k << ',' << queries.size() << ',' << batch.mean_pe
            << ',' << batch.pe_stderr << ',' << batch.p50_micros << ',' << batch.p95_micros << ','
            << built.build_seconds() << ',' << index_bytes << ',' << dataset_bytes << ",,,\n";
      }
      for (auto mix : mixes) {
        auto copy = built;
        auto updated = corpus;
        const auto t = timed_update(copy, updated, mix, std::min(bf.update_batch, corpus.size()), sc.generator.params,
                                    derive_seed(g.seed, "bench-update"), g.threads);
        out << bf.sweep << ',' << value << ',' << nh << ",,,,,,," << built.build_seconds() << ',' << index_bytes
            << ',' << dataset_bytes << ',' << mix << ',' << t.seconds << ',' << t.index_seconds << '\n';
      }
      out.flush();
    }
  }
  auto cfg = mob.json();
  cfg.update(grid.json());
  cfg.update(mf.json());
  cfg.update({{"hashes_list", bf.hashes}, {"k_list", bf.ks}, {"queries", bf.queries}, {"sweep", bf.sweep},
              {"values", bf.values}, {"update_mixes", bf.mixes}, {"update_batch", bf.update_batch}, {"out", bf.out}});
  write_manifest(bf.out + ".manifest.json", "bench", g, cfg);
}

void cmd_predict(const PEConfig& c) {
  const auto v = analytic_value_distribution(c);
  std::cout << "predicted_pe,raw_mass\n" << predict_pe(c, v) << ',' << v.raw_mass << '\n';
}

void cmd_compare(const Global& g, const std::string& dataset, const std::string& ks, const std::string& measures,
                 std::size_t queries, const MeasureFlags& mf, const std::string& out_path) {
  const auto corpus = load_corpus(dataset);
  const int m = corpus.index().height();
  const auto k_list = parse_list<std::size_t>(ks);
  auto reference_params = mf.params();
  reference_params.variant = MeasureVariant::adm;
  const Measure reference(reference_params, m);
  std::vector<MeasureVariant> variants;
  std::stringstream ss(measures);
  std::string name;
  while (std::getline(ss, name, ':'))
    if (!name.empty()) variants.push_back(parse_measure_variant(name));
  const auto sample = sample_queries(corpus.size(), queries, g.seed);
  auto out = open_out(out_path);
  out << "measure,k,k_avg,ad_diff\n";
  for (auto variant : variants) {
    auto p = mf.params();
    p.variant = variant;
    const Measure other(p, m);
    for (auto k : k_list) {
      if (k >= corpus.size()) fail(ErrorCode::infeasible, "k must be smaller than the corpus size");
      double kavg = 0, diff = 0;
      for (auto q : sample) {
        const QueryRequest req{&corpus.sequence(q), q, k};
        const auto a = top_from_degrees(all_degrees(corpus.sequences(), req, reference), k);
        const auto b = top_from_degrees(all_degrees(corpus.sequences(), req, other), k);
        std::vector<EntityId> ia, ib;
        std::vector<double> da, db;
        for (const auto& r : a) ia.push_back(r.entity), da.push_back(r.degree);
        for (const auto& r : b) ib.push_back(r.entity), db.push_back(r.degree);
        kavg += k_avg(ia, ib);
        diff += ad_diff(da, db);
      }
      const auto n = static_cast<double>(sample.size());
      out << to_string(variant) << ',' << k << ',' << kavg / n << ',' << diff / n << '\n';
    }
  }
  auto cfg = mf.json();
  cfg.update({{"dataset", dataset}, {"k_list", ks}, {"measures", measures}, {"queries", queries}, {"out", out_path}});
  write_manifest(out_path + ".manifest.json", "compare-measures", g, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Top-k associated entity search over digital traces"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "run seed; every random stream derives from it")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
  app.add_option("--hashes", g.hashes, "hash functions n_h")->capture_default_str();
  app.add_flag("--store-full-signatures", g.full_signatures, "keep whole group signatures in tree nodes");

  MobilityFlags gen_mob;
  GridFlags gen_grid;
  std::string gen_out, gen_hierarchy;
  auto* generate = app.add_subcommand("generate", "simulate traces with the hierarchical mobility model");
  gen_mob.add_to(generate);
  gen_grid.add_to(generate);
  generate->add_option("--out", gen_out, "trace JSONL output")->required();
  generate->add_option("--hierarchy-out", gen_hierarchy, "hierarchy CSV output (default <out>.hierarchy.csv)");

  std::string in_traces, in_hierarchy, in_out;
  std::int64_t unit_seconds = 3600;
  auto* ingest_cmd = app.add_subcommand("ingest", "convert a trace file into a canonical dataset");
  ingest_cmd->add_option("--traces", in_traces)->required();
  ingest_cmd->add_option("--hierarchy", in_hierarchy)->required();
  ingest_cmd->add_option("--unit-seconds", unit_seconds, "temporal unit length")->capture_default_str();
  ingest_cmd->add_option("--out", in_out)->required();

  std::string b_dataset, b_out;
  auto* build = app.add_subcommand("build", "build and save a MinSigTree index");
  build->add_option("--dataset", b_dataset)->required();
  build->add_option("--out", b_out)->required();

  std::string q_dataset, q_index, q_entity, q_scope = "all", q_stats;
  std::size_t q_k = 10;
  MeasureFlags q_measure;
  auto* query = app.add_subcommand("query", "top-k associated entities of one entity");
  query->add_option("--dataset", q_dataset)->required();
  query->add_option("--index", q_index)->required();
  query->add_option("--entity", q_entity)->required();
  query->add_option("--k", q_k)->capture_default_str();
  query->add_option("--scope", q_scope, "pruned-set scope: all or base")->capture_default_str();
  query->add_option("--stats-out", q_stats, "append-free stats CSV");
  q_measure.add_to(query);

  std::string u_dataset, u_index, u_traces, u_out_dataset, u_out_index;
  auto* update = app.add_subcommand("update", "apply new records to a dataset and its index");
  update->add_option("--dataset", u_dataset)->required();
  update->add_option("--index", u_index)->required();
  update->add_option("--traces", u_traces, "new records (JSONL or CSV)")->required();
  update->add_option("--out-dataset", u_out_dataset, "default: overwrite --dataset");
  update->add_option("--out-index", u_out_index, "default: overwrite --index");

  BenchFlags bf;
  MobilityFlags bench_mob;
  GridFlags bench_grid;
  MeasureFlags bench_measure;
  auto* bench = app.add_subcommand("bench", "PE, latency, build and update sweeps on synthetic corpora");
  bench->add_option("--hashes-list", bf.hashes)->capture_default_str();
  bench->add_option("--k-list", bf.ks)->capture_default_str();
  bench->add_option("--queries", bf.queries)->capture_default_str();
  bench->add_option("--sweep", bf.sweep, "alpha, beta, gamma, rho, zeta, a, b or m");
  bench->add_option("--values", bf.values, "sweep values v1,v2,...");
  bench->add_option("--update-mixes", bf.mixes, "existing-entity fractions")->capture_default_str();
  bench->add_option("--update-batch", bf.update_batch)->capture_default_str();
  bench->add_option("--out", bf.out, "CSV report")->required();
  bench_mob.add_to(bench);
  bench_grid.add_to(bench);
  bench_measure.add_to(bench);

  PEConfig pe;
  auto* predict = app.add_subcommand("predict-pe", "analytic pruning effectiveness");
  predict->add_option("--n", pe.n, "base units")->required();
  predict->add_option("--t", pe.t, "temporal units")->required();
  predict->add_option("--trace-size", pe.trace_size)->required();
  predict->add_option("--nr", pe.sub_ranges)->capture_default_str();
  predict->add_option("--nc", pe.min_shared)->capture_default_str();
  predict->add_option("--de", pe.expected_degree)->capture_default_str();

  std::string c_dataset, c_ks = "1,10,50", c_measures = "adm:dice:jaccard:cosine", c_out;
  std::size_t c_queries = 100;
  MeasureFlags c_measure;
  auto* compare = app.add_subcommand("compare-measures", "K_avg and ADDiff of each measure against ADM");
  compare->add_option("--corpus", c_dataset, "dataset file")->required();
  compare->add_option("--k", c_ks, "k list")->capture_default_str();
  compare->add_option("--measures", c_measures)->capture_default_str();
  compare->add_option("--queries", c_queries)->capture_default_str();
  compare->add_option("--out", c_out)->required();
  c_measure.add_to(compare);

  CLI11_PARSE(app, argc, argv);
  if (g.threads == 0) g.threads = default_threads();

  try {
    if (*generate) cmd_generate(g, gen_mob, gen_grid, gen_out, gen_hierarchy);
    else if (*ingest_cmd) cmd_ingest(g, in_traces, in_hierarchy, unit_seconds, in_out);
    else if (*build) cmd_build(g, b_dataset, b_out);
    else if (*query) cmd_query(app, g, q_dataset, q_index, q_entity, q_k, q_measure, q_scope, q_stats);
    else if (*update) cmd_update(g, u_dataset, u_index, u_traces, u_out_dataset, u_out_index);
    else if (*bench) cmd_bench(g, bf, bench_mob, bench_grid, bench_measure);
    else if (*predict) {
      pe.hash_count = g.hashes;
      cmd_predict(pe);
    } else if (*compare) cmd_compare(g, c_dataset, c_ks, c_measures, c_queries, c_measure, c_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
