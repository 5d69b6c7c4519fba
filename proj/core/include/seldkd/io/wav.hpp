#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seldkd::io {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  // Interleaved-free layout: samples[c][i], values in [-1, 1] for PCM input.
  std::vector<std::vector<float>> samples;

  std::int64_t frames() const { return samples.empty() ? 0 : static_cast<std::int64_t>(samples[0].size()); }
};

// Reads RIFF WAV, PCM 16-bit or IEEE float 32-bit.
WavData read_wav(const std::string& path);

enum class WavEncoding { kPcm16, kFloat32 };

void write_wav(const std::string& path, const WavData& wav, WavEncoding enc = WavEncoding::kFloat32);

}  // namespace seldkd::io
