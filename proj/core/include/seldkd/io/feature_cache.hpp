#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seldkd::io {

// Cached feature tensor: float32 payload in row-major order.
struct FeatureArray {
  std::vector<int> dims;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : dims) n *= d;
    return n;
  }
};

// File layout: magic "SELDFT1\0", little-endian u32 rank, u32 per-dim sizes,
// then the float32 payload. Round-trips bit-exactly.
void write_feature_cache(const std::string& path, const FeatureArray& arr);
FeatureArray read_feature_cache(const std::string& path);

}  // namespace seldkd::io
