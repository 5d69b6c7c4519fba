#include "seldkd/features/mel.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::features {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(int n_mel, int n_bins, int sample_rate) {
  if (n_mel <= 0 || n_bins <= 1 || sample_rate <= 0)
    throw std::invalid_argument("make_mel_filterbank: bad dimensions");
  MelFilterbank fb;
  fb.n_mel = n_mel;
  fb.n_bins = n_bins;
  fb.sample_rate = sample_rate;
  fb.weights.assign(static_cast<std::size_t>(n_mel) * n_bins, 0.0);

  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(n_mel + 2);
  for (int i = 0; i < n_mel + 2; ++i) edges[i] = mel_to_hz(mel_hi * i / (n_mel + 1));

  // Bin f holds frequency f * nyquist / (n_bins - 1).
  const double bin_hz = nyquist / (n_bins - 1);
  for (int k = 0; k < n_mel; ++k) {
    const double lo = edges[k], center = edges[k + 1], hi = edges[k + 2];
    double row_sum = 0.0;
    for (int f = 0; f < n_bins; ++f) {
      const double hz = f * bin_hz;
      double w = 0.0;
      if (hz >= lo && hz <= center && center > lo)
        w = (hz - lo) / (center - lo);
      else if (hz > center && hz <= hi && hi > center)
        w = (hi - hz) / (hi - center);
      fb.weights[static_cast<std::size_t>(k) * n_bins + f] = w;
      row_sum += w;
    }
    if (row_sum <= 0.0) {
      // Degenerate narrow band: fall back to the bin nearest the center.
      const int f = static_cast<int>(std::lround(center / bin_hz));
      fb.weights[static_cast<std::size_t>(k) * n_bins + std::min(f, n_bins - 1)] = 1.0;
    } else {
      for (int f = 0; f < n_bins; ++f)
        fb.weights[static_cast<std::size_t>(k) * n_bins + f] /= row_sum;
    }
  }
  return fb;
}

}  // namespace seldkd::features
