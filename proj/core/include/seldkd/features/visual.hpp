#pragma once

#include <vector>

#include "seldkd/features/acoustic.hpp"
#include "seldkd/io/csv.hpp"

namespace seldkd::features {

inline constexpr int kMaxSpeakers = 6;
inline constexpr int kVisualChannels = 2 * kMaxSpeakers;  // 12
inline constexpr int kVisualWidth = kMelBands;            // 64
inline constexpr double kSigmaSqU = 0.04;
inline constexpr double kSigmaSqV = 0.08;

struct MouthKeypoints {
  std::vector<io::KeypointRow> entries;  // frame at 10 fps, u/v in [0,1]
  void validate() const;
};

// [time, width=64, channel=12]; channel 2s is the azimuth vector of speaker
// s, channel 2s+1 the elevation vector. Absent speakers are all-zero.
struct VisualFeature {
  std::vector<float> data;
  int n_frames = 0;

  float at(int t, int i, int c) const {
    return data[(static_cast<std::size_t>(t) * kVisualWidth + i) * kVisualChannels + c];
  }
};

// [time=500, width=64, channel=19]; channels 0-6 acoustic, 7-18 visual
// (each visual frame replicated over 5 consecutive acoustic frames).
struct MultiModalFeature {
  std::vector<float> data;
  int n_frames = 0;
  static constexpr int kChannels = kAcousticChannels + kVisualChannels;  // 19
};

// Gaussian likelihood vectors sampled at 64 cell-center points per axis.
VisualFeature gaussian_vectors(const MouthKeypoints& kp, double duration_s);

MultiModalFeature fuse_multimodal(const AcousticFeature& a, const VisualFeature& v);

}  // namespace seldkd::features
