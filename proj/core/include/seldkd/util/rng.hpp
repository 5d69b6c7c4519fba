#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace seldkd {

// Deterministic random source. All distribution transforms are implemented
// explicitly so that a given seed produces the same stream on every platform
// and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::int64_t uniform_int(std::int64_t n);

  // Standard normal via polar Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(alpha, 1) via Marsaglia-Tsang, alpha > 0.
  double gamma(double alpha);

  // Beta(alpha, beta) from two gamma draws.
  double beta(double alpha, double beta);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

  // Derive an independent stream for a named purpose.
  Rng fork(std::uint64_t stream_id) const;

 private:
  std::mt19937_64 engine_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace seldkd
