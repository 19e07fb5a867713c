#include "drssl/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace drssl {

const char* to_string(DataErrorCode code) {
  switch (code) {
    case DataErrorCode::io_error: return "io error";
    case DataErrorCode::corrupt_header: return "corrupt header";
    case DataErrorCode::dimension_overflow: return "dimension overflow";
    case DataErrorCode::truncated_payload: return "truncated payload";
    case DataErrorCode::invalid_record: return "invalid record";
    case DataErrorCode::invalid_argument: return "invalid argument";
  }
  return "unknown";
}

namespace binio {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorCode::io_error, "cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::io_error, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrorCode::io_error, "write failed for " + path);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace binio
}  // namespace drssl
