// Small binary/file helpers shared by the corpus and checkpoint formats.
#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ctcsim/core.hpp"

namespace ctcsim {

/// FNV-1a 64-bit over raw bytes; the record/tensor corruption check.
uint64_t fnv1a64(std::span<const uint8_t> bytes);

/// Whole-file read/write with DataError on failure.
std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v);
  void bytes(std::span<const uint8_t> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void str(const std::string& s);  // u32 length + bytes

  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

/// Bounds-checked little-endian reader; throws DataError past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64();
  std::string str();
  std::span<const uint8_t> raw(size_t n);
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(size_t n) const;
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

/// Fixed-format double for text outputs: round-trip exact, locale-free.
std::string format_double(double v);

}  // namespace ctcsim
