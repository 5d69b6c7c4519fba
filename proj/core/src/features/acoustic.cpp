#include "seldkd/features/acoustic.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::features {

int hop_for(int sample_rate) {
  if (sample_rate % kFeatureFps != 0)
    throw std::invalid_argument("sample rate must be divisible by 50 to hit the frame grid");
  return sample_rate / kFeatureFps;
}

std::vector<float> intensity_vectors(const FoaStft& s, const MelFilterbank& fb) {
  if (fb.n_bins != s.n_bins) throw std::invalid_argument("intensity_vectors: filterbank bin mismatch");
  const int t_frames = s.n_frames;
  const int n_bins = s.n_bins;
  std::vector<float> out(static_cast<std::size_t>(t_frames) * kMelBands * 3, 0.0f);
  std::vector<double> norm_iv(static_cast<std::size_t>(n_bins) * 3);
  for (int t = 0; t < t_frames; ++t) {
    for (int f = 0; f < n_bins; ++f) {
      const std::size_t idx = static_cast<std::size_t>(t) * n_bins + f;
      const auto w = s.frames[0][idx];
      double iv[3];
      for (int c = 0; c < 3; ++c) iv[c] = (std::conj(w) * s.frames[1 + c][idx]).real();
      const double norm = std::sqrt(iv[0] * iv[0] + iv[1] * iv[1] + iv[2] * iv[2]);
      for (int c = 0; c < 3; ++c) norm_iv[f * 3 + c] = iv[c] / (norm + kEps);
    }
    for (int k = 0; k < kMelBands; ++k) {
      const double* row = fb.weights.data() + static_cast<std::size_t>(k) * n_bins;
      double acc[3] = {0.0, 0.0, 0.0};
      for (int f = 0; f < n_bins; ++f) {
        const double w = row[f];
        if (w == 0.0) continue;
        acc[0] += w * norm_iv[f * 3 + 0];
        acc[1] += w * norm_iv[f * 3 + 1];
        acc[2] += w * norm_iv[f * 3 + 2];
      }
      for (int c = 0; c < 3; ++c) {
        const double v = std::min(1.0, std::max(-1.0, -acc[c]));
        out[(static_cast<std::size_t>(t) * kMelBands + k) * 3 + c] = static_cast<float>(v);
      }
    }
  }
  return out;
}

std::vector<float> log_mel(const FoaStft& s, const MelFilterbank& fb) {
  if (fb.n_bins != s.n_bins) throw std::invalid_argument("log_mel: filterbank bin mismatch");
  const int t_frames = s.n_frames;
  const int n_bins = s.n_bins;
  std::vector<float> out(static_cast<std::size_t>(t_frames) * kMelBands * 4);
  std::vector<double> power(n_bins);
  for (int c = 0; c < 4; ++c) {
    for (int t = 0; t < t_frames; ++t) {
      for (int f = 0; f < n_bins; ++f) {
        const auto v = s.frames[c][static_cast<std::size_t>(t) * n_bins + f];
        power[f] = v.real() * v.real() + v.imag() * v.imag();
      }
      for (int k = 0; k < kMelBands; ++k) {
        const double* row = fb.weights.data() + static_cast<std::size_t>(k) * n_bins;
        double acc = 0.0;
        for (int f = 0; f < n_bins; ++f) acc += row[f] * power[f];
        out[(static_cast<std::size_t>(t) * kMelBands + k) * 4 + c] =
            static_cast<float>(std::log(acc + kEps));
      }
    }
  }
  return out;
}

AcousticFeature acoustic_features(const FoaWaveform& wave) {
  wave.validate();
  const std::int64_t clip_samples = static_cast<std::int64_t>(kClipSeconds * wave.sample_rate);
  if (wave.n_samples() > clip_samples)
    throw std::invalid_argument("acoustic_features: clip longer than 10 s, use acoustic_features_split");
  FoaWaveform padded = wave;
  for (auto& ch : padded.samples) ch.resize(clip_samples, 0.0);

  const FoaStft s = stft(padded, kWindowLen, hop_for(wave.sample_rate));
  const MelFilterbank fb = make_mel_filterbank(kMelBands, s.n_bins, wave.sample_rate);
  const auto lm = log_mel(s, fb);
  const auto iv = intensity_vectors(s, fb);

  AcousticFeature feat;
  feat.n_frames = s.n_frames;
  feat.data.resize(static_cast<std::size_t>(s.n_frames) * kMelBands * kAcousticChannels);
  for (int t = 0; t < s.n_frames; ++t)
    for (int k = 0; k < kMelBands; ++k) {
      const std::size_t src = static_cast<std::size_t>(t) * kMelBands + k;
      float* dst = feat.data.data() + src * kAcousticChannels;
      for (int c = 0; c < 4; ++c) dst[c] = lm[src * 4 + c];
      for (int c = 0; c < 3; ++c) dst[4 + c] = iv[src * 3 + c];
    }
  return feat;
}

std::vector<AcousticFeature> acoustic_features_split(const FoaWaveform& wave) {
  wave.validate();
  const std::int64_t clip_samples = static_cast<std::int64_t>(kClipSeconds * wave.sample_rate);
  const std::int64_t total = wave.n_samples();
  const std::int64_t n_segments = std::max<std::int64_t>(1, (total + clip_samples - 1) / clip_samples);
  std::vector<AcousticFeature> out;
  out.reserve(n_segments);
  for (std::int64_t seg = 0; seg < n_segments; ++seg) {
    FoaWaveform piece;
    piece.sample_rate = wave.sample_rate;
    piece.samples.resize(4);
    const std::int64_t begin = seg * clip_samples;
    const std::int64_t end = std::min(total, begin + clip_samples);
    for (int c = 0; c < 4; ++c)
      piece.samples[c].assign(wave.samples[c].begin() + begin, wave.samples[c].begin() + end);
    out.push_back(acoustic_features(piece));
  }
  return out;
}

}  // namespace seldkd::features
