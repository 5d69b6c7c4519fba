#include "seldkd/features/stft.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::features {

void FoaWaveform::validate() const {
  if (samples.size() != 4)
    throw std::invalid_argument("FoaWaveform: expected exactly 4 channels (w,x,y,z), got " +
                                std::to_string(samples.size()));
  if (sample_rate <= 0) throw std::invalid_argument("FoaWaveform: sample_rate must be positive");
  const std::size_t n = samples[0].size();
  for (const auto& ch : samples) {
    if (ch.size() != n) throw std::invalid_argument("FoaWaveform: channel lengths differ");
    for (double v : ch)
      if (!std::isfinite(v)) throw std::invalid_argument("FoaWaveform: non-finite sample");
  }
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft_radix2: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

FoaStft stft(const FoaWaveform& wave, int window_len, int hop) {
  wave.validate();
  if (window_len <= 0 || (window_len & (window_len - 1)) != 0)
    throw std::invalid_argument("stft: window_len must be a power of two");
  if (hop <= 0) throw std::invalid_argument("stft: hop must be positive");

  const std::int64_t n = wave.n_samples();
  const int n_frames = std::max<std::int64_t>(
      1, std::llround(static_cast<double>(n) / static_cast<double>(hop)));
  const int n_bins = window_len / 2 + 1;

  std::vector<double> window(window_len);
  for (int i = 0; i < window_len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (window_len - 1));

  FoaStft out;
  out.window_len = window_len;
  out.hop = hop;
  out.n_frames = n_frames;
  out.n_bins = n_bins;
  out.sample_rate = wave.sample_rate;
  out.frames.assign(4, std::vector<std::complex<double>>(
                           static_cast<std::size_t>(n_frames) * n_bins));

  std::vector<std::complex<double>> buf(window_len);
  for (int c = 0; c < 4; ++c) {
    const auto& x = wave.samples[c];
    for (int t = 0; t < n_frames; ++t) {
      const std::int64_t start = static_cast<std::int64_t>(t) * hop;
      for (int i = 0; i < window_len; ++i) {
        const std::int64_t s = start + i;
        buf[i] = (s < n) ? x[s] * window[i] : 0.0;
      }
      fft_radix2(buf);
      for (int f = 0; f < n_bins; ++f)
        out.frames[c][static_cast<std::size_t>(t) * n_bins + f] = buf[f];
    }
  }
  return out;
}

}  // namespace seldkd::features
