#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace seldkd::features {

// 4-channel first-order Ambisonics waveform, channel order w, x, y, z.
struct FoaWaveform {
  std::vector<std::vector<double>> samples;  // [channel][sample]
  int sample_rate = 24000;

  std::int64_t n_samples() const {
    return samples.empty() ? 0 : static_cast<std::int64_t>(samples[0].size());
  }
  double duration_s() const { return static_cast<double>(n_samples()) / sample_rate; }
  void validate() const;
};

// Per-channel complex spectra, Hamming-windowed frames.
struct FoaStft {
  // frames[c][t * n_bins + f]
  std::vector<std::vector<std::complex<double>>> frames;
  int window_len = 0;
  int hop = 0;
  int n_frames = 0;
  int n_bins = 0;  // window_len / 2 + 1
  int sample_rate = 0;
};

// Frame count is round(n_samples / hop); the tail is zero-padded.
FoaStft stft(const FoaWaveform& wave, int window_len, int hop);

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

}  // namespace seldkd::features
