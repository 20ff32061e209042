#pragma once

// Canonical corpus: a hierarchy plus one cell sequence per entity, with a
// binary on-disk form and trace-file ingestion.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minsig/hierarchy.hpp"
#include "minsig/traces.hpp"

namespace minsig {

class Corpus {
 public:
  Corpus() = default;
  /// Entities get ids in name order.
  Corpus(SpIndex index, const std::map<std::string, DigitalTrace>& traces, std::int64_t unit_seconds);

  const SpIndex& index() const noexcept { return index_; }
  std::int64_t unit_seconds() const noexcept { return unit_seconds_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(EntityId e) const { return names_.at(e); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::span<const CellSequence> sequences() const noexcept { return sequences_; }
  const CellSequence& sequence(EntityId e) const { return sequences_.at(e); }
  std::optional<EntityId> find(std::string_view name) const;
  /// Throws unknown_entity.
  EntityId at(std::string_view name) const;

  /// Temporal units spanned by the corpus, [first, last].
  TimeIndex first_time() const noexcept { return first_time_; }
  TimeIndex last_time() const noexcept { return last_time_; }
  std::uint64_t temporal_units() const noexcept { return size() ? last_time_ - first_time_ + 1 : 1; }
  /// n * t, the hash range.
  std::uint64_t hash_range() const noexcept { return index_.base_count() * temporal_units(); }
  std::size_t base_cell_count() const;

  /// Replaces an entity's base cells, or appends a new entity (id = size()).
  EntityId upsert(const std::string& name, std::span<const STCell> base_cells);

  /// crc32 of the canonical encoding.
  std::uint32_t fingerprint() const;

  friend std::vector<std::uint8_t> encode_corpus(const Corpus& corpus);
  friend Corpus decode_corpus(std::span<const std::uint8_t> bytes);

 private:
  void add(const std::string& name, CellSequence seq);
  void refresh_extent();

  SpIndex index_;
  std::int64_t unit_seconds_ = 3600;
  std::vector<std::string> names_;
  std::vector<CellSequence> sequences_;
  std::map<std::string, EntityId, std::less<>> ids_;
  TimeIndex first_time_ = 0;
  TimeIndex last_time_ = 0;
};

/// Corpus from generated base-cell traces with generator entity names.
Corpus corpus_from_cells(const SpIndex& index, std::span<const std::vector<STCell>> traces,
                         std::int64_t unit_seconds);

/// Reads JSON lines (`entity`, `location`, `start`, optional `end`) or CSV
/// with an `entity,location,start[,end]` header. Times are epoch seconds; a
/// missing end means one temporal unit. Errors carry line numbers.
std::vector<RawRecord> read_trace_records(std::istream& in, std::int64_t unit_seconds);
std::vector<RawRecord> read_trace_file(const std::string& path, std::int64_t unit_seconds);

/// Errors: every record naming an unknown or non-base location is listed.
Corpus ingest(std::span<const RawRecord> records, SpIndex index, std::int64_t unit_seconds);
Corpus ingest_files(const std::string& trace_path, const std::string& hierarchy_path,
                    std::int64_t unit_seconds);

/// Binary layout: magic, version, unit length, hierarchy CSV, entity
/// directory (names, cell counts), cell keys, crc32.
std::vector<std::uint8_t> encode_corpus(const Corpus& corpus);
Corpus decode_corpus(std::span<const std::uint8_t> bytes);
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace minsig
