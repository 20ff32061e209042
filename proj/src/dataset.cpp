#include "minsig/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>

#include "json.hpp"

#include "byte_codec.hpp"
#include "minsig/mobility.hpp"

namespace minsig {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io_error, "write failed for " + path);
}

}  // namespace detail

namespace {

constexpr char kMagic[4] = {'M', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Corpus::Corpus(SpIndex index, const std::map<std::string, DigitalTrace>& traces, std::int64_t unit_seconds)
    : index_(std::move(index)), unit_seconds_(unit_seconds) {
  if (unit_seconds <= 0) fail(ErrorCode::invalid_argument, "temporal unit must be positive");
  for (const auto& [name, trace] : traces) {
    if (trace.cells.empty()) continue;
    add(name, lift_sequence(trace.cells, index_));
  }
  refresh_extent();
}

void Corpus::add(const std::string& name, CellSequence seq) {
  ids_.emplace(name, static_cast<EntityId>(names_.size()));
  names_.push_back(name);
  sequences_.push_back(std::move(seq));
}

void Corpus::refresh_extent() {
  bool any = false;
  for (const auto& seq : sequences_) {
    const auto base = seq.base();
    if (base.empty()) continue;
    const auto lo = STCell::from_key(base.front()).time, hi = STCell::from_key(base.back()).time;
    first_time_ = any ? std::min(first_time_, lo) : lo;
    last_time_ = any ? std::max(last_time_, hi) : hi;
    any = true;
  }
}

std::optional<EntityId> Corpus::find(std::string_view name) const {
  const auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

EntityId Corpus::at(std::string_view name) const {
  const auto id = find(name);
  if (!id) fail(ErrorCode::unknown_entity, "unknown entity '" + std::string(name) + "'");
  return *id;
}

std::size_t Corpus::base_cell_count() const {
  std::size_t n = 0;
  for (const auto& seq : sequences_) n += seq.base().size();
  return n;
}

EntityId Corpus::upsert(const std::string& name, std::span<const STCell> base_cells) {
  std::vector<STCell> cells(base_cells.begin(), base_cells.end());
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  if (cells.empty()) fail(ErrorCode::invalid_argument, "entity '" + name + "' has no cells");
  auto seq = lift_sequence(cells, index_);
  EntityId id;
  if (const auto existing = find(name)) {
    id = *existing;
    sequences_[id] = std::move(seq);
  } else {
    id = static_cast<EntityId>(names_.size());
    add(name, std::move(seq));
  }
  refresh_extent();
  return id;
}

std::uint32_t Corpus::fingerprint() const {
  const auto bytes = encode_corpus(*this);
  std::uint32_t crc;
  std::memcpy(&crc, bytes.data() + bytes.size() - sizeof(crc), sizeof(crc));
  return crc;
}

Corpus corpus_from_cells(const SpIndex& index, std::span<const std::vector<STCell>> traces,
                         std::int64_t unit_seconds) {
  std::map<std::string, DigitalTrace> grouped;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto name = generated_entity_name(i, traces.size());
    auto& t = grouped[name];
    t.entity = name;
    t.cells = traces[i];
    std::sort(t.cells.begin(), t.cells.end());
    t.cells.erase(std::unique(t.cells.begin(), t.cells.end()), t.cells.end());
  }
  return Corpus(index, grouped, unit_seconds);
}

namespace {

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

std::int64_t parse_seconds(std::string_view text, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) fail(ErrorCode::parse_error, line_error(line, "bad timestamp '" + std::string(text) + "'"));
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

RawRecord json_record(const std::string& text, std::size_t line, std::int64_t unit_seconds) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::parse_error, line_error(line, "invalid JSON"));
  RawRecord r;
  r.line = line;
  try {
    r.entity = j.at("entity").get<std::string>();
    r.location = j.at("location").get<std::string>();
    r.start = j.at("start").get<std::int64_t>();
    r.end = j.contains("end") && !j["end"].is_null() ? j["end"].get<std::int64_t>() : r.start + unit_seconds;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, line_error(line, e.what()));
  }
  return r;
}

}  // namespace

std::vector<RawRecord> read_trace_records(std::istream& in, std::int64_t unit_seconds) {
  std::vector<RawRecord> out;
  std::string text;
  std::size_t line = 0;
  enum class Format { unknown, jsonl, csv } format = Format::unknown;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    if (format == Format::unknown) {
      format = text[first] == '{' ? Format::jsonl : Format::csv;
      if (format == Format::csv) {
        const auto header = split_csv(text);
        if (header.size() < 3 || header[0] != "entity" || header[1] != "location" || header[2] != "start" ||
            (header.size() == 4 && header[3] != "end") || header.size() > 4)
          fail(ErrorCode::parse_error, line_error(line, "expected header entity,location,start[,end]"));
        continue;
      }
    }
    if (format == Format::jsonl) {
      out.push_back(json_record(text, line, unit_seconds));
      continue;
    }
    const auto f = split_csv(text);
    if (f.size() < 3 || f.size() > 4) fail(ErrorCode::parse_error, line_error(line, "expected 3 or 4 fields"));
    RawRecord r{f[0], f[1], parse_seconds(f[2], line), 0, line};
    r.end = f.size() == 4 && !f[3].empty() ? parse_seconds(f[3], line) : r.start + unit_seconds;
    if (r.entity.empty() || r.location.empty()) fail(ErrorCode::parse_error, line_error(line, "empty field"));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawRecord> read_trace_file(const std::string& path, std::int64_t unit_seconds) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  return read_trace_records(in, unit_seconds);
}

Corpus ingest(std::span<const RawRecord> records, SpIndex index, std::int64_t unit_seconds) {
  std::vector<std::size_t> bad;
  std::string first_bad;
  for (const auto& r : records) {
    const auto u = index.find(r.location);
    if (!u || !index.is_base(*u)) {
      if (bad.empty()) first_bad = r.location;
      bad.push_back(r.line);
    }
  }
  if (!bad.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) lines += (i ? "," : "") + std::to_string(bad[i]);
    if (bad.size() > 20) lines += ",...";
    fail(ErrorCode::unknown_unit, std::to_string(bad.size()) + " record(s) name a missing or non-base location (first '" +
                                      first_bad + "') at lines " + lines);
  }
  const auto traces = discretize_trace(records, index, unit_seconds);
  return Corpus(std::move(index), traces, unit_seconds);
}

Corpus ingest_files(const std::string& trace_path, const std::string& hierarchy_path, std::int64_t unit_seconds) {
  auto index = read_hierarchy_file(hierarchy_path);
  const auto records = read_trace_file(trace_path, unit_seconds);
  return ingest(records, std::move(index), unit_seconds);
}

std::vector<std::uint8_t> encode_corpus(const Corpus& corpus) {
  detail::ByteWriter w;
  w.raw({kMagic, 4});
  w.fixed(kVersion);
  w.fixed(corpus.unit_seconds_);
  std::ostringstream hierarchy;
  write_hierarchy_csv(corpus.index_, hierarchy);
  w.text(hierarchy.str());
  w.fixed(static_cast<std::uint32_t>(corpus.size()));
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    w.text(corpus.names_[e]);
    w.fixed(static_cast<std::uint32_t>(corpus.sequences_[e].base().size()));
  }
  // Cells as (time, base position) so the block does not depend on unit ids.
  for (const auto& seq : corpus.sequences_)
    for (auto key : seq.base()) {
      const auto cell = STCell::from_key(key);
      w.fixed(cell.time);
      w.fixed(corpus.index_.base_position(cell.unit));
    }
  w.seal();
  return std::move(w.bytes());
}

Corpus decode_corpus(std::span<const std::uint8_t> bytes) {
  const std::string what = "dataset";
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
      fail(ErrorCode::checksum_mismatch, what + ": file is truncated");
    fail(ErrorCode::parse_error, what + ": not a dataset file");
  }
  detail::ByteReader r(detail::verified_body(bytes, what), what);
  r.fixed<std::uint32_t>();  // magic
  if (r.fixed<std::uint32_t>() != kVersion) fail(ErrorCode::version_mismatch, what + ": unsupported version");
  Corpus c;
  c.unit_seconds_ = r.fixed<std::int64_t>();
  std::istringstream hierarchy(r.text());
  c.index_ = read_hierarchy_csv(hierarchy);
  const auto n = r.fixed<std::uint32_t>();
  std::vector<std::pair<std::string, std::uint32_t>> dir;
  for (std::uint32_t e = 0; e < n; ++e) {
    auto name = r.text();
    dir.emplace_back(std::move(name), r.fixed<std::uint32_t>());
  }
  for (auto& [name, count] : dir) {
    std::vector<STCell> cells(count);
    for (auto& cell : cells) {
      cell.time = r.fixed<TimeIndex>();
      const auto pos = r.fixed<std::uint32_t>();
      if (pos >= c.index_.base_count()) fail(ErrorCode::parse_error, what + ": base position out of range");
      cell.unit = c.index_.base_unit(pos);
    }
    c.add(name, lift_sequence(cells, c.index_));
  }
  if (!r.done()) fail(ErrorCode::parse_error, what + ": trailing bytes");
  c.refresh_extent();
  return c;
}

void save_corpus(const Corpus& corpus, const std::string& path) { detail::write_file(path, encode_corpus(corpus)); }

Corpus load_corpus(const std::string& path) { return decode_corpus(detail::read_file(path)); }

}  // namespace minsig
