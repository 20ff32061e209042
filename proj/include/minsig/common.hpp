#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace minsig {

/// Dense index of a spatial unit inside one SpIndex.
using UnitId = std::uint32_t;
/// Dense index of an entity inside one Corpus (entities are kept name-sorted).
using EntityId = std::uint32_t;
/// Base-temporal-unit index (epoch seconds divided by the unit length).
using TimeIndex = std::uint32_t;
/// Zero-based position of a hash function inside a HashFamily.
using HashIndex = std::uint32_t;
/// Hash values lie in [0, range).
using HashValue = std::uint32_t;

enum class ErrorCode {
  invalid_argument,
  malformed_hierarchy,
  unknown_unit,
  unknown_entity,
  parse_error,
  family_mismatch,
  checksum_mismatch,
  version_mismatch,
  io_error,
  infeasible,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

/// A spatial-temporal cell: one base temporal unit at one spatial unit (any level).
struct STCell {
  TimeIndex time = 0;
  UnitId unit = 0;

  constexpr std::uint64_t key() const noexcept {
    return (static_cast<std::uint64_t>(time) << 32) | unit;
  }
  static constexpr STCell from_key(std::uint64_t key) noexcept {
    return {static_cast<TimeIndex>(key >> 32), static_cast<UnitId>(key & 0xffffffffu)};
  }
  friend constexpr bool operator==(const STCell&, const STCell&) = default;
  friend constexpr auto operator<=>(const STCell& a, const STCell& b) noexcept {
    return a.key() <=> b.key();
  }
};

/// splitmix64 finalizer; used for all seeded mixing in the library.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a component seed from the run seed and a label, so every
/// random stream in a run flows from one `--seed`.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master ^ h) + index);
}

}  // namespace minsig
