#include "seldkd/features/visual.hpp"

#include <cmath>
#include <stdexcept>

namespace seldkd::features {

void MouthKeypoints::validate() const {
  for (const auto& e : entries) {
    if (e.speaker < 0 || e.speaker >= kMaxSpeakers)
      throw std::invalid_argument("MouthKeypoints: speaker index " + std::to_string(e.speaker) +
                                  " outside 0.." + std::to_string(kMaxSpeakers - 1));
    if (e.u < 0.0 || e.u > 1.0 || e.v < 0.0 || e.v > 1.0)
      throw std::invalid_argument("MouthKeypoints: coordinates outside [0,1]");
    if (e.frame < 0) throw std::invalid_argument("MouthKeypoints: negative frame index");
  }
}

VisualFeature gaussian_vectors(const MouthKeypoints& kp, double duration_s) {
  kp.validate();
  const int t_frames = std::max(1, static_cast<int>(std::lround(duration_s * kLabelFps)));
  VisualFeature feat;
  feat.n_frames = t_frames;
  feat.data.assign(static_cast<std::size_t>(t_frames) * kVisualWidth * kVisualChannels, 0.0f);
  for (const auto& e : kp.entries) {
    if (e.frame >= t_frames) continue;
    for (int i = 0; i < kVisualWidth; ++i) {
      const double grid = (i + 0.5) / kVisualWidth;
      const double du = grid - e.u;
      const double dv = grid - e.v;
      const std::size_t base =
          (static_cast<std::size_t>(e.frame) * kVisualWidth + i) * kVisualChannels;
      feat.data[base + 2 * e.speaker] = static_cast<float>(std::exp(-du * du / kSigmaSqU));
      feat.data[base + 2 * e.speaker + 1] = static_cast<float>(std::exp(-dv * dv / kSigmaSqV));
    }
  }
  return feat;
}

MultiModalFeature fuse_multimodal(const AcousticFeature& a, const VisualFeature& v) {
  constexpr int kReplicate = kFeatureFps / kLabelFps;  // 5
  if (a.n_frames != v.n_frames * kReplicate)
    throw std::invalid_argument("fuse_multimodal: frame-count mismatch after replication (" +
                                std::to_string(a.n_frames) + " acoustic vs " +
                                std::to_string(v.n_frames) + " visual)");
  MultiModalFeature m;
  m.n_frames = a.n_frames;
  m.data.resize(static_cast<std::size_t>(a.n_frames) * kMelBands * MultiModalFeature::kChannels);
  for (int t = 0; t < a.n_frames; ++t) {
    const int tv = t / kReplicate;
    for (int k = 0; k < kMelBands; ++k) {
      float* dst =
          m.data.data() + (static_cast<std::size_t>(t) * kMelBands + k) * MultiModalFeature::kChannels;
      const float* src_a =
          a.data.data() + (static_cast<std::size_t>(t) * kMelBands + k) * kAcousticChannels;
      const float* src_v =
          v.data.data() + (static_cast<std::size_t>(tv) * kVisualWidth + k) * kVisualChannels;
      for (int c = 0; c < kAcousticChannels; ++c) dst[c] = src_a[c];
      for (int c = 0; c < kVisualChannels; ++c) dst[kAcousticChannels + c] = src_v[c];
    }
  }
  return m;
}

}  // namespace seldkd::features
