#include "seldkd/io/feature_cache.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace seldkd::io {

namespace {
constexpr char kMagic[8] = {'S', 'E', 'L', 'D', 'F', 'T', '1', '\0'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_feature_cache(const std::string& path, const FeatureArray& arr) {
  if (static_cast<std::int64_t>(arr.data.size()) != arr.numel())
    throw std::invalid_argument("feature cache: payload size does not match dims");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create feature cache: " + path);
  out.write(kMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(arr.dims.size()));
  for (int d : arr.dims) write_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(arr.data.data()),
            static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing feature cache: " + path);
}

FeatureArray read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature cache: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad feature cache magic: " + path);
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) throw std::runtime_error("implausible feature cache rank: " + path);
  FeatureArray arr;
  arr.dims.resize(rank);
  for (auto& d : arr.dims) d = static_cast<int>(read_u32(in));
  arr.data.resize(static_cast<std::size_t>(arr.numel()));
  in.read(reinterpret_cast<char*>(arr.data.data()),
          static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated feature cache: " + path);
  return arr;
}

}  // namespace seldkd::io
