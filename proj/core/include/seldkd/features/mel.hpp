#pragma once

#include <vector>

namespace seldkd::features {

// Triangular Mel-band filters (HTK mel scale) spanning 0 Hz to Nyquist.
// Each row is scaled to unit sum so projecting per-bin unit vectors keeps
// every component inside [-1, 1].
struct MelFilterbank {
  std::vector<double> weights;  // [n_mel * n_bins]
  int n_mel = 0;
  int n_bins = 0;
  int sample_rate = 0;

  double at(int mel, int bin) const { return weights[static_cast<std::size_t>(mel) * n_bins + bin]; }
};

MelFilterbank make_mel_filterbank(int n_mel, int n_bins, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace seldkd::features
