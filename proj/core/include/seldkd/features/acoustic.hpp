#pragma once

#include <vector>

#include "seldkd/features/mel.hpp"
#include "seldkd/features/stft.hpp"

namespace seldkd::features {

inline constexpr int kMelBands = 64;
inline constexpr int kAcousticChannels = 7;  // 4 log-Mel + 3 intensity
inline constexpr int kWindowLen = 1024;
inline constexpr int kLabelFps = 10;      // 100 ms label frames
inline constexpr int kFeatureFps = 50;    // acoustic feature frames per second
inline constexpr double kClipSeconds = 10.0;
inline constexpr double kEps = 1e-8;

// [time, mel=64, channel=7]; channels 0-3 log-Mel of w,x,y,z power,
// channels 4-6 Mel-band intensity (x,y,z), clamped to [-1, 1].
struct AcousticFeature {
  std::vector<float> data;
  int n_frames = 0;

  float at(int t, int k, int c) const {
    return data[(static_cast<std::size_t>(t) * kMelBands + k) * kAcousticChannels + c];
  }
};

int hop_for(int sample_rate);

// Mel-projected normalized intensity vectors, [time * 64 * 3], in [-1, 1].
std::vector<float> intensity_vectors(const FoaStft& s, const MelFilterbank& fb);

// Log power Mel spectrograms, [time * 64 * 4].
std::vector<float> log_mel(const FoaStft& s, const MelFilterbank& fb);

// Full 7-channel feature for one clip of at most 10 s (shorter clips are
// zero-padded to 10 s, so the output always has 500 frames at 24 kHz).
AcousticFeature acoustic_features(const FoaWaveform& wave);

// Splits arbitrarily long input into consecutive 10 s segments, the final
// remainder zero-padded.
std::vector<AcousticFeature> acoustic_features_split(const FoaWaveform& wave);

}  // namespace seldkd::features
