#include "seldkd/io/wav.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace seldkd::io {

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path);
  char tag[5] = {0};
  in.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  WavData wav;
  while (in.read(tag, 4)) {
    const std::uint32_t chunk_size = read_u32(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      sample_rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("WAV data chunk before fmt: " + path);
      if (channels == 0) throw std::runtime_error("WAV has zero channels: " + path);
      const bool pcm16 = format == 1 && bits == 16;
      const bool f32 = format == 3 && bits == 32;
      if (!pcm16 && !f32)
        throw std::runtime_error("unsupported WAV encoding (need PCM16 or float32): " + path);
      const std::uint32_t bytes_per_sample = bits / 8;
      const std::uint32_t frame_bytes = bytes_per_sample * channels;
      const std::uint32_t n_frames = chunk_size / frame_bytes;
      wav.sample_rate = static_cast<int>(sample_rate);
      wav.channels = channels;
      wav.samples.assign(channels, std::vector<float>(n_frames));
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), chunk_size);
      if (!in) throw std::runtime_error("truncated WAV data: " + path);
      for (std::uint32_t i = 0; i < n_frames; ++i)
        for (int c = 0; c < channels; ++c) {
          const char* p = raw.data() + (static_cast<std::size_t>(i) * channels + c) * bytes_per_sample;
          if (pcm16) {
            std::int16_t s;
            std::memcpy(&s, p, 2);
            wav.samples[c][i] = static_cast<float>(s) / 32768.0f;
          } else {
            float s;
            std::memcpy(&s, p, 4);
            wav.samples[c][i] = s;
          }
        }
      return wav;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error("WAV file has no data chunk: " + path);
}

void write_wav(const std::string& path, const WavData& wav, WavEncoding enc) {
  if (wav.channels != static_cast<int>(wav.samples.size()))
    throw std::invalid_argument("write_wav: channel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create WAV file: " + path);
  const std::uint32_t n_frames = static_cast<std::uint32_t>(wav.frames());
  const std::uint16_t bits = enc == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t fmt = enc == WavEncoding::kPcm16 ? 1 : 3;
  const std::uint32_t data_bytes = n_frames * wav.channels * (bits / 8);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, fmt);
  write_u16(out, static_cast<std::uint16_t>(wav.channels));
  write_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * wav.channels * (bits / 8));
  write_u16(out, static_cast<std::uint16_t>(wav.channels * (bits / 8)));
  write_u16(out, bits);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (std::uint32_t i = 0; i < n_frames; ++i)
    for (int c = 0; c < wav.channels; ++c) {
      const float v = wav.samples[c][i];
      if (enc == WavEncoding::kPcm16) {
        const float clipped = std::min(1.0f, std::max(-1.0f, v));
        const std::int16_t s = static_cast<std::int16_t>(std::lrintf(clipped * 32767.0f));
        out.write(reinterpret_cast<const char*>(&s), 2);
      } else {
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  if (!out) throw std::runtime_error("failed writing WAV file: " + path);
}

}  // namespace seldkd::io
