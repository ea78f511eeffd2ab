// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "lipspeech/error.hpp"
#include "lipspeech/media_io.hpp"

namespace lipspeech::media {

Waveform resample(const Waveform& in, int target_rate) {
  if (target_rate <= 0 || in.sample_rate <= 0) throw ConfigError("sample rates must be positive");
  if (target_rate == in.sample_rate) return in;
  const double ratio = static_cast<double>(target_rate) / in.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // relative to the input Nyquist
  constexpr int kZeros = 16;
  const double half_width = kZeros / cutoff;  // in input samples
  const auto n_out = static_cast<Index>(std::llround(static_cast<double>(in.size()) * ratio));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(n_out), 0.0);
  const Index n_in = in.size();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) / ratio;
    const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(t - half_width)));
    const Index hi = std::min<Index>(n_in - 1, static_cast<Index>(std::floor(t + half_width)));
    double acc = 0.0;
    for (Index j = lo; j <= hi; ++j) {
      const double d = static_cast<double>(j) - t;
      const double x = d * cutoff;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * d / half_width);
      acc += in.samples[static_cast<std::size_t>(j)] * sinc * win * cutoff;
    }
    out.samples[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

void normalize_peak(Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0)
    for (double& s : w.samples) s /= peak;
}

// --- WAV --------------------------------------------------------------------

namespace {

std::uint32_t le32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
std::uint16_t le16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw InputError(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::size_t len = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, bytes.size() - body);
    if (id == "fmt ") {
      if (avail < 16) throw InputError(path.string() + ": short fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == 0xFFFE && avail >= 26) format = le16(bytes.data() + body + 24);
    } else if (id == "data") {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (!data || channels == 0 || rate == 0) throw InputError(path.string() + ": missing fmt or data chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw InputError(path.string() + ": unsupported sample format (need 16-bit PCM or 32-bit float)");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data + (i * channels + c) * width;
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        acc += s / 32768.0;
      } else {
        float s;
        std::memcpy(&s, p, 4);
        acc += s;
      }
    }
    w.samples[i] = acc / channels;
  }
  return resample(w, target_rate);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out.write("RIFF", 4);
  put32(36 + data_len);
  out.write("WAVEfmt ", 8);
  put32(16);
  put16(1);
  put16(1);
  put32(static_cast<std::uint32_t>(w.sample_rate));
  put32(static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(2);
  put16(16);
  out.write("data", 4);
  put32(data_len);
  for (double s : w.samples) {
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    put16(static_cast<std::uint16_t>(v));
  }
}

}  // namespace lipspeech::media
