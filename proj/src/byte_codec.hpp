#pragma once

// Little-endian byte encoding shared by the dataset and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "minsig/common.hpp"

namespace minsig::detail {

static_assert(std::endian::native == std::endian::little, "formats assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void fixed(T v) {
    const auto at = bytes_.size();
    bytes_.resize(at + sizeof(T));
    std::memcpy(bytes_.data() + at, &v, sizeof(T));
  }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      bytes_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    bytes_.push_back(static_cast<std::uint8_t>(v));
  }
  void text(std::string_view s) {
    varint(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::uint32_t crc() const {
    return static_cast<std::uint32_t>(::crc32(0L, bytes_.data(), static_cast<uInt>(bytes_.size())));
  }
  /// Appends the crc32 of everything written so far.
  void seal() { fixed(crc()); }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T fixed() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      need(1);
      const auto b = bytes_[pos_++];
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
    }
    fail(ErrorCode::parse_error, what_ + ": malformed varint");
  }
  std::string text() {
    const auto n = varint();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail(ErrorCode::parse_error, what_ + ": unexpected end of data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

/// Splits off and verifies a trailing crc32. Files too short to hold one
/// count as corrupt.
inline std::span<const std::uint8_t> verified_body(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < sizeof(std::uint32_t)) fail(ErrorCode::checksum_mismatch, what + ": file is truncated");
  const auto body = bytes.first(bytes.size() - sizeof(std::uint32_t));
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  const auto actual = static_cast<std::uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size())));
  if (stored != actual) fail(ErrorCode::checksum_mismatch, what + ": checksum mismatch");
  return body;
}

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace minsig::detail
