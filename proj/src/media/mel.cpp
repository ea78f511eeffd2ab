// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lipspeech/error.hpp"
#include "lipspeech/fft.hpp"
#include "lipspeech/media_io.hpp"

namespace lipspeech::media {

namespace {

constexpr double kLinearMelStep = 200.0 / 3.0;
constexpr double kBreakHz = 1000.0;
constexpr double kBreakMel = kBreakHz / kLinearMelStep;
const double kLogStep = std::log(6.4) / 27.0;

void check(const MelConfig& cfg) {
  if (cfg.win_length > cfg.n_fft || cfg.hop <= 0 || cfg.n_mels <= 0)
    throw ConfigError("invalid mel configuration");
  if (!(cfg.fmin >= 0.0 && cfg.fmax > cfg.fmin && cfg.fmax <= cfg.sample_rate / 2.0))
    throw ConfigError("mel frequency range must satisfy 0 <= fmin < fmax <= sr/2");
  if (!(cfg.norm_max > cfg.norm_min)) throw ConfigError("mel normalization range is empty");
}

// Mirror index without repeating the edge sample.
Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

double hz_to_mel(double hz) {
  if (hz < kBreakHz) return hz / kLinearMelStep;
  return kBreakMel + std::log(hz / kBreakHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kBreakMel) return mel * kLinearMelStep;
  return kBreakHz * std::exp((mel - kBreakMel) * kLogStep);
}

std::vector<double> analysis_window(const MelConfig& cfg) {
  check(cfg);
  std::vector<double> w(static_cast<std::size_t>(cfg.n_fft), 0.0);
  const Index offset = (cfg.n_fft - cfg.win_length) / 2;
  for (Index n = 0; n < cfg.win_length; ++n)
    w[static_cast<std::size_t>(offset + n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(cfg.win_length));
  return w;
}

std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> hz(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < hz.size(); ++i)
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return {hz.begin() + 1, hz.end() - 1};
}

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  check(cfg);
  const Index bins = cfg.n_fft / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  std::vector<double> fb(static_cast<std::size_t>(cfg.n_mels * bins), 0.0);
  for (Index m = 0; m < cfg.n_mels; ++m) {
    const double f0 = edges[static_cast<std::size_t>(m)];
    const double f1 = edges[static_cast<std::size_t>(m + 1)];
    const double f2 = edges[static_cast<std::size_t>(m + 2)];
    const double area = 2.0 / (f2 - f0);
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      const double v = std::max(0.0, std::min((f - f0) / (f1 - f0), (f2 - f) / (f2 - f1)));
      fb[static_cast<std::size_t>(m * bins + k)] = v * area;
    }
  }
  return fb;
}

std::vector<double> stft_magnitude(std::span<const double> x, const MelConfig& cfg, Index* frames_out) {
  check(cfg);
  const auto len = static_cast<Index>(x.size());
  if (len == 0) throw InputError("empty waveform");
  const Index frames = cfg.frames_for(len);
  const Index bins = cfg.n_fft / 2 + 1;
  const std::vector<double> window = analysis_window(cfg);
  const RealFft fft(cfg.n_fft);
  std::vector<double> mag(static_cast<std::size_t>(frames * bins));
#pragma omp parallel
  {
    std::vector<double> buf(static_cast<std::size_t>(cfg.n_fft));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
#pragma omp for schedule(static)
    for (Index t = 0; t < frames; ++t) {
      const Index start = t * cfg.hop - cfg.n_fft / 2;
      for (Index j = 0; j < cfg.n_fft; ++j)
        buf[static_cast<std::size_t>(j)] =
            window[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(reflect(start + j, len))];
      fft.forward(buf.data(), spec.data());
      for (Index k = 0; k < bins; ++k) mag[static_cast<std::size_t>(t * bins + k)] = std::abs(spec[static_cast<std::size_t>(k)]);
    }
  }
  if (frames_out) *frames_out = frames;
  return mag;
}

std::vector<double> log_mel(std::span<const double> x, const MelConfig& cfg, Index* frames_out) {
  Index frames = 0;
  const std::vector<double> mag = stft_magnitude(x, cfg, &frames);
  const std::vector<double> fb = mel_filterbank(cfg);
  const Index bins = cfg.n_fft / 2 + 1;
  std::vector<double> out(static_cast<std::size_t>(frames * cfg.n_mels));
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < frames; ++t)
    for (Index m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* f = fb.data() + m * bins;
      const double* s = mag.data() + t * bins;
      for (Index k = 0; k < bins; ++k) acc += f[k] * s[k];
      out[static_cast<std::size_t>(t * cfg.n_mels + m)] = std::log(std::max(acc, cfg.log_floor));
    }
  if (frames_out) *frames_out = frames;
  return out;
}

double normalize_log_mel(double v, const MelConfig& cfg) {
  return std::clamp((v - cfg.norm_min) / (cfg.norm_max - cfg.norm_min), 0.0, 1.0);
}

double denormalize_log_mel(double v, const MelConfig& cfg) {
  return cfg.norm_min + v * (cfg.norm_max - cfg.norm_min);
}

MelSpectrogram extract_mel(const Waveform& audio, const MelConfig& cfg) {
  if (audio.sample_rate != cfg.sample_rate)
    throw InputError("waveform sample rate " + std::to_string(audio.sample_rate) + " differs from mel config " +
                     std::to_string(cfg.sample_rate));
  MelSpectrogram mel;
  mel.bins = cfg.n_mels;
  mel.hop = cfg.hop;
  mel.window = cfg.win_length;
  mel.sample_rate = cfg.sample_rate;
  mel.values = log_mel(audio.samples, cfg, &mel.frames);
  for (double& v : mel.values) v = normalize_log_mel(v, cfg);
  return mel;
}

MelConfig fit_mel_normalization(std::span<const Waveform> corpus, MelConfig cfg) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Waveform& w : corpus) {
    const std::vector<double> lm = log_mel(w.samples, cfg, nullptr);
    for (double v : lm) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) throw InputError("corpus log-mel range is degenerate");
  cfg.norm_min = lo;
  cfg.norm_max = hi;
  return cfg;
}

Tensor MelSpectrogram::to_tensor() const { return Tensor({frames, bins}, values); }

MelSpectrogram MelSpectrogram::from_tensor(const Tensor& t, const MelConfig& cfg) {
  if (t.rank() != 2) throw InputError("mel tensor must be [frames, bins], got " + shape_str(t.shape()));
  MelSpectrogram mel;
  mel.frames = t.dim(0);
  mel.bins = t.dim(1);
  mel.values = t.values();
  mel.hop = cfg.hop;
  mel.window = cfg.win_length;
  mel.sample_rate = cfg.sample_rate;
  return mel;
}

}  // namespace lipspeech::media
