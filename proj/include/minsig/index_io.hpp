#pragma once

// Binary MinSigTree persistence. The file holds the family header, the
// dataset fingerprint, preorder node records and a trailing crc32.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "minsig/minsigtree.hpp"

namespace minsig {

struct StoredIndex {
  MinSigTree tree;
  std::uint32_t dataset_fingerprint = 0;
};

std::vector<std::uint8_t> encode_index(const MinSigTree& tree, std::uint32_t dataset_fingerprint);
/// Errors: checksum_mismatch (also for truncation), version_mismatch,
/// parse_error.
StoredIndex decode_index(std::span<const std::uint8_t> bytes);
void save_index(const MinSigTree& tree, std::uint32_t dataset_fingerprint, const std::string& path);
StoredIndex load_index(const std::string& path);

/// Errors with family_mismatch when the index was built under another family.
void check_family(const MinSigTree& tree, const FamilyHeader& family);

}  // namespace minsig
