#include "binio.hpp"

#include <bit>
#include <fstream>

namespace mpr::binio {

static_assert(std::endian::native == std::endian::little,
              "serialized formats assume a little-endian host");

namespace {
struct Crc32Table {
  uint32_t t[256];
  Crc32Table() {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
  }
};
const Crc32Table kTable;
}  // namespace

uint32_t crc32(const void* data, size_t n, uint32_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = kTable.t[(c ^ p[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void write_file(const std::string& path, const Writer& w, bool append_crc) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(w.data().data(), static_cast<std::streamsize>(w.size()));
  if (append_crc) {
    const uint32_t crc = w.checksum();
    f.write(reinterpret_cast<const char*>(&crc), 4);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open: " + path);
  const auto n = static_cast<size_t>(f.tellg());
  std::vector<char> buf(n);
  f.seekg(0);
  f.read(buf.data(), static_cast<std::streamsize>(n));
  if (!f) throw std::runtime_error("read failed: " + path);
  return buf;
}

Reader checked_reader(const std::vector<char>& file) {
  if (file.size() < 4) throw FormatError("file too short for checksum", 0);
  const size_t payload = file.size() - 4;
  uint32_t stored;
  std::memcpy(&stored, file.data() + payload, 4);
  const uint32_t actual = crc32(file.data(), payload);
  if (stored != actual) throw FormatError("checksum mismatch", payload);
  return Reader(file.data(), payload);
}

}  // namespace mpr::binio
