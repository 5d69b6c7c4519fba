#include "seldkd/synth/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "seldkd/io/wav.hpp"

namespace seldkd::synth {

features::FoaWaveform foa_encode(const std::vector<double>& mono, double azimuth_deg,
                                 double elevation_deg, int sample_rate, bool sn3d) {
  const double az = azimuth_deg * M_PI / 180.0;
  const double el = elevation_deg * M_PI / 180.0;
  const double dip = sn3d ? 1.0 / std::sqrt(3.0) : 1.0;
  const double gx = dip * std::cos(az) * std::cos(el);
  const double gy = dip * std::sin(az) * std::cos(el);
  const double gz = dip * std::sin(el);
  features::FoaWaveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.assign(4, std::vector<double>(mono.size()));
  for (std::size_t i = 0; i < mono.size(); ++i) {
    const double s = mono[i];
    wave.samples[0][i] = s;
    wave.samples[1][i] = gx * s;
    wave.samples[2][i] = gy * s;
    wave.samples[3][i] = gz * s;
  }
  return wave;
}

double class_center_hz(int class_idx, int n_classes) {
  const double lo = 300.0, hi = 8000.0;
  if (n_classes <= 1) return std::sqrt(lo * hi);
  const double t = static_cast<double>(class_idx) / (n_classes - 1);
  return lo * std::pow(hi / lo, t);
}

std::vector<double> class_signal(int class_idx, int n_classes, double duration_s, int sample_rate,
                                 SourceEvent::SignalKind kind, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  std::vector<double> s(n, 0.0);
  const double fc = class_center_hz(class_idx, n_classes);
  if (kind == SourceEvent::SignalKind::kTone) {
    for (std::size_t i = 0; i < n; ++i)
      s[i] = 0.5 * std::sin(2.0 * M_PI * fc * i / sample_rate);
    return s;
  }
  // 2/3-octave band of random-phase sinusoids around the class center.
  constexpr int kComponents = 64;
  const double f_lo = fc / std::pow(2.0, 1.0 / 3.0);
  const double f_hi = std::min(fc * std::pow(2.0, 1.0 / 3.0), sample_rate / 2.0 * 0.95);
  const double amp = 0.5 / std::sqrt(static_cast<double>(kComponents) / 2.0);
  for (int k = 0; k < kComponents; ++k) {
    const double f = rng.uniform(f_lo, f_hi);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double w = 2.0 * M_PI * f / sample_rate;
    for (std::size_t i = 0; i < n; ++i) s[i] += amp * std::sin(w * static_cast<double>(i) + phase);
  }
  return s;
}

void angles_to_uv(double azimuth_deg, double elevation_deg, double& u, double& v) {
  u = std::fmod((180.0 - azimuth_deg) / 360.0, 1.0);
  if (u < 0.0) u += 1.0;
  v = (90.0 - elevation_deg) / 180.0;
}

void uv_to_angles(double u, double v, double& azimuth_deg, double& elevation_deg) {
  azimuth_deg = 180.0 - 360.0 * u;
  if (azimuth_deg >= 180.0) azimuth_deg -= 360.0;
  if (azimuth_deg < -180.0) azimuth_deg += 360.0;
  elevation_deg = 90.0 - 180.0 * v;
}

SynthScene synth_scene(const SceneSpec& spec) {
  if (spec.n_events < 0) throw std::invalid_argument("synth_scene: n_events must be >= 0");
  Rng rng(spec.seed);
  const auto n_samples = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));

  SynthScene scene;
  scene.wave.sample_rate = spec.sample_rate;
  scene.wave.samples.assign(4, std::vector<double>(n_samples, 0.0));

  for (int e = 0; e < spec.n_events; ++e) {
    SourceEvent ev;
    ev.class_idx = static_cast<int>(rng.uniform_int(spec.n_classes));
    const double duration = rng.uniform(1.0, 3.0);
    ev.onset_s = rng.uniform(0.0, std::max(0.1, spec.clip_seconds - duration));
    ev.offset_s = std::min(spec.clip_seconds, ev.onset_s + duration);
    ev.azimuth_deg = rng.uniform(-180.0, 180.0);
    ev.elevation_deg = rng.uniform(-60.0, 60.0);
    ev.distance_m = rng.uniform(1.0, 3.0);
    ev.kind = SourceEvent::SignalKind::kBandNoise;
    scene.events.push_back(ev);

    auto mono = class_signal(ev.class_idx, spec.n_classes, ev.offset_s - ev.onset_s,
                             spec.sample_rate, ev.kind, rng);
    // Short fades avoid clicks at the event boundaries.
    const std::size_t fade = std::min<std::size_t>(mono.size() / 4, spec.sample_rate / 100);
    for (std::size_t i = 0; i < fade; ++i) {
      const double g = static_cast<double>(i) / fade;
      mono[i] *= g;
      mono[mono.size() - 1 - i] *= g;
    }
    const double gain = 1.0 / ev.distance_m;
    const auto encoded =
        foa_encode(mono, ev.azimuth_deg, ev.elevation_deg, spec.sample_rate, spec.sn3d);
    const auto start = static_cast<std::size_t>(std::llround(ev.onset_s * spec.sample_rate));
    for (int c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < mono.size() && start + i < n_samples; ++i)
        scene.wave.samples[c][start + i] += gain * encoded.samples[c][i];
  }

  if (spec.add_noise) {
    double signal_power = 0.0;
    for (double v : scene.wave.samples[0]) signal_power += v * v;
    signal_power /= std::max<std::size_t>(1, n_samples);
    const double noise_power = signal_power / std::pow(10.0, spec.snr_db / 10.0);
    const double sigma = std::sqrt(std::max(noise_power, 1e-20));
    const double dipole_sigma = sigma / std::sqrt(3.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      scene.wave.samples[0][i] += sigma * rng.normal();
      for (int c = 1; c < 4; ++c) scene.wave.samples[c][i] += dipole_sigma * rng.normal();
    }
  }

  // Labels on the 100 ms grid: a frame is active when its center falls
  // inside the event.
  const int n_label_frames = static_cast<int>(std::llround(spec.clip_seconds * features::kLabelFps));
  for (int l = 0; l < n_label_frames; ++l) {
    const double center = (l + 0.5) / features::kLabelFps;
    for (std::size_t e = 0; e < scene.events.size(); ++e) {
      const auto& ev = scene.events[e];
      if (center < ev.onset_s || center >= ev.offset_s) continue;
      io::LabelRow row;
      row.frame = l;
      row.cls = ev.class_idx;
      row.track = static_cast<int>(e);
      row.azimuth_deg = ev.azimuth_deg;
      row.elevation_deg = ev.elevation_deg;
      row.distance_cm = ev.distance_m * 100.0;
      scene.labels.push_back(row);
      if (ev.class_idx < spec.n_speech_classes && static_cast<int>(e) < 6) {
        io::KeypointRow kp;
        kp.frame = l;
        kp.speaker = static_cast<int>(e);
        angles_to_uv(ev.azimuth_deg, ev.elevation_deg, kp.u, kp.v);
        scene.keypoints.push_back(kp);
      }
    }
  }
  return scene;
}

std::vector<std::string> write_dataset(const std::string& dir, const SceneSpec& base_spec,
                                       int n_clips) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> ids;
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw std::runtime_error("cannot create manifest in " + dir);
  manifest << "# seed=" << base_spec.seed << " clips=" << n_clips << " events=" << base_spec.n_events
           << "\n";
  for (int i = 0; i < n_clips; ++i) {
    SceneSpec spec = base_spec;
    spec.seed = base_spec.seed + static_cast<std::uint64_t>(i) * 0x9e3779b9ULL;
    const SynthScene scene = synth_scene(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04d", i);
    const std::string base = dir + "/" + name;
    io::WavData wav;
    wav.sample_rate = spec.sample_rate;
    wav.channels = 4;
    wav.samples.assign(4, std::vector<float>(scene.wave.samples[0].size()));
    for (int c = 0; c < 4; ++c)
      for (std::size_t s = 0; s < scene.wave.samples[c].size(); ++s)
        wav.samples[c][s] = static_cast<float>(scene.wave.samples[c][s]);
    io::write_wav(base + ".wav", wav, io::WavEncoding::kFloat32);
    io::write_label_csv(base + "_labels.csv", scene.labels);
    io::write_keypoint_csv(base + "_keypoints.csv", scene.keypoints);
    manifest << name << "\n";
    ids.emplace_back(name);
  }
  return ids;
}

}  // namespace seldkd::synth
