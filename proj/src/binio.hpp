#pragma once

// Little-endian binary serialization helpers and CRC32. Assumes a
// little-endian host (checked at startup of readers/writers).

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "mpr/errors.hpp"

namespace mpr::binio {

uint32_t crc32(const void* data, size_t n, uint32_t seed = 0);

/// Append-only byte sink keeping a running CRC.
class Writer {
 public:
  void raw(const void* data, size_t n) { buf_.insert(buf_.end(), (const char*)data, (const char*)data + n); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64s(const double* p, size_t n) { raw(p, 8 * n); }
  void bytes(const std::string& s) { raw(s.data(), s.size()); }
  size_t size() const { return buf_.size(); }
  const std::vector<char>& data() const { return buf_; }
  uint32_t checksum() const { return crc32(buf_.data(), buf_.size()); }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked cursor over a loaded file; throws FormatError with the
/// offending offset on truncation.
class Reader {
 public:
  Reader(const char* data, size_t n) : data_(data), size_(n) {}

  void raw(void* out, size_t n) {
    if (pos_ + n > size_) throw FormatError("unexpected end of file", pos_);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  void f64s(double* p, size_t n) { raw(p, 8 * n); }
  std::string bytes(size_t n) { std::string s(n, '\0'); raw(s.data(), n); return s; }
  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }
  const char* data() const { return data_; }

 private:
  const char* data_;
  size_t size_;
  size_t pos_ = 0;
};

void write_file(const std::string& path, const Writer& w, bool append_crc = true);
std::vector<char> read_file(const std::string& path);

/// Verifies the trailing CRC32 and returns a reader over the payload.
Reader checked_reader(const std::vector<char>& file);

}  // namespace mpr::binio
