#pragma once

// Hierarchy-aware MinHash: a hash family over ST-cells where a coarse cell
// hashes to the minimum over its base descendants at the same time.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "minsig/common.hpp"
#include "minsig/hierarchy.hpp"
#include "minsig/traces.hpp"

namespace minsig {

using SigVector = Eigen::Matrix<HashValue, Eigen::Dynamic, 1>;
/// n_h x |E| matrix for one level; column e is entity e's signature.
using SigMatrix = Eigen::Matrix<HashValue, Eigen::Dynamic, Eigen::Dynamic>;

/// Parameters that identify a family; stored in index headers.
struct FamilyHeader {
  std::uint32_t hash_count = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t range = 0;
  bool table_mode = false;

  friend bool operator==(const FamilyHeader&, const FamilyHeader&) = default;
};

class HashFamily {
 public:
  HashFamily() = default;
  /// Seeded family: base cells hash to mix64(seed_u, time, base position) mod range.
  HashFamily(std::uint32_t hash_count, std::uint64_t master_seed, std::uint64_t range);

  /// Fixed lookup table for base cells (tests and worked examples). Each
  /// entry gives one base cell's values for hash 0..n_h-1. Range is one past
  /// the largest value. Unlisted base cells hash to range - 1.
  static HashFamily from_table(const SpIndex& index,
                               std::span<const std::pair<STCell, std::vector<HashValue>>> table);

  std::uint32_t size() const noexcept { return header_.hash_count; }
  std::uint64_t range() const noexcept { return header_.range; }
  std::uint64_t master_seed() const noexcept { return header_.master_seed; }
  const FamilyHeader& header() const noexcept { return header_; }

  /// Hash of the base cell at `position` in depth-first base order.
  HashValue base_hash(HashIndex u, TimeIndex time, std::uint32_t position) const {
    if (!table_.empty()) return table_lookup(u, time, position);
    const std::uint64_t cell = (static_cast<std::uint64_t>(time) << 32) | position;
    return static_cast<HashValue>(mix64(seeds_[u] + cell * 0xd1342543de82ef95ULL) % header_.range);
  }

 private:
  HashValue table_lookup(HashIndex u, TimeIndex time, std::uint32_t position) const;

  FamilyHeader header_;
  std::vector<std::uint64_t> seeds_;
  std::unordered_map<std::uint64_t, std::vector<HashValue>> table_;  // (time, position) key
};

/// h_u of any cell: base cells hash directly, coarse cells take the minimum
/// over their base descendants at the same time. Errors: unknown unit,
/// u out of range.
HashValue hash_cell(const HashFamily& family, HashIndex u, STCell cell, const SpIndex& index);

/// One entity's signatures, level 1 first.
struct SignatureList {
  std::vector<SigVector> levels;

  int height() const noexcept { return static_cast<int>(levels.size()); }
  const SigVector& level(int l) const { return levels.at(static_cast<std::size_t>(l - 1)); }
};

/// Signatures of one entity. Errors: empty trace.
SignatureList compute_signatures(const CellSequence& seq, const HashFamily& family,
                                 const SpIndex& index);

/// Signatures for a whole corpus, one matrix per level.
struct SignatureSet {
  std::vector<SigMatrix> levels;

  int height() const noexcept { return static_cast<int>(levels.size()); }
  std::size_t entity_count() const noexcept { return levels.empty() ? 0 : levels[0].cols(); }
  std::uint32_t hash_count() const noexcept {
    return levels.empty() ? 0 : static_cast<std::uint32_t>(levels[0].rows());
  }
  const SigMatrix& level(int l) const { return levels.at(static_cast<std::size_t>(l - 1)); }
  SigMatrix& level(int l) { return levels.at(static_cast<std::size_t>(l - 1)); }
  SignatureList entity(std::size_t e) const;
  void set_entity(std::size_t e, const SignatureList& sig);
};

/// Batch signature computation. Hashes are processed in blocks; for each
/// block every (time, unit) cell touched by the corpus is tabulated once and
/// entity signatures are columnwise minima over their cells. Deterministic
/// for any thread count. Empty sequences are rejected.
SignatureSet compute_signature_set(std::span<const CellSequence> sequences, const HashFamily& family,
                                   const SpIndex& index, unsigned threads = 1);

/// True iff `sig_value` > h_u(cell): then no entity whose level-`level_i`
/// signature holds `sig_value` at u has the cell. Errors when the cell is
/// coarser than `level_i`.
bool excludes(HashValue sig_value, int level_i, HashIndex u, STCell cell, const HashFamily& family,
              const SpIndex& index);

}  // namespace minsig
