#pragma once

#include <string>
#include <vector>

#include "seldkd/features/stft.hpp"
#include "seldkd/io/csv.hpp"
#include "seldkd/util/rng.hpp"

namespace seldkd::synth {

struct SourceEvent {
  int class_idx = 0;  // 0..n_classes-1
  double onset_s = 0.0;
  double offset_s = 0.0;
  double azimuth_deg = 0.0;    // [-180, 180)
  double elevation_deg = 0.0;  // [-90, 90]
  double distance_m = 1.0;
  enum class SignalKind { kBandNoise, kTone } kind = SignalKind::kBandNoise;
};

struct SceneSpec {
  int n_events = 3;
  double clip_seconds = 10.0;
  double snr_db = 60.0;  // diffuse-noise SNR; ignored when add_noise is false
  bool add_noise = false;
  std::uint64_t seed = 0;
  int sample_rate = 24000;
  int n_classes = 13;
  bool sn3d = false;  // scale dipole channels by 1/sqrt(3)
  int n_speech_classes = 2;  // classes that emit mouth keypoints
};

// Unit-gain FOA plane-wave encoding: w = s, x = s cos(az)cos(el),
// y = s sin(az)cos(el), z = s sin(el).
features::FoaWaveform foa_encode(const std::vector<double>& mono, double azimuth_deg,
                                 double elevation_deg, int sample_rate, bool sn3d = false);

// Class-keyed band-limited noise (random-phase sinusoids inside a band whose
// center is log-spaced per class) or a pure tone at the band center.
std::vector<double> class_signal(int class_idx, int n_classes, double duration_s, int sample_rate,
                                 SourceEvent::SignalKind kind, Rng& rng);
double class_center_hz(int class_idx, int n_classes);

struct SynthScene {
  features::FoaWaveform wave;
  std::vector<SourceEvent> events;
  std::vector<io::LabelRow> labels;        // 100 ms frames
  std::vector<io::KeypointRow> keypoints;  // 10 fps, speech classes only
};

SynthScene synth_scene(const SceneSpec& spec);

// Equirectangular camera mapping used for keypoints and its inverse.
void angles_to_uv(double azimuth_deg, double elevation_deg, double& u, double& v);
void uv_to_angles(double u, double v, double& azimuth_deg, double& elevation_deg);

// Writes clip_XXX.wav / clip_XXX_labels.csv / clip_XXX_keypoints.csv plus a
// manifest; returns the clip ids.
std::vector<std::string> write_dataset(const std::string& dir, const SceneSpec& base_spec,
                                       int n_clips);

}  // namespace seldkd::synth
