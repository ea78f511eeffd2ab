// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "lipspeech/error.hpp"
#include "lipspeech/fft.hpp"
#include "lipspeech/media_io.hpp"

namespace lipspeech::media {

namespace {

using Complex = std::complex<double>;
constexpr double kSmoothness = 3.0;

// Least-squares mel-to-linear map with a second-difference smoothness prior,
// solved on peak-normalized triangles so the prior is scale free.
Eigen::MatrixXd mel_inverse(const MelConfig& cfg, std::vector<double>* row_peak) {
  const Index bins = cfg.n_fft / 2 + 1;
  const std::vector<double> fb = mel_filterbank(cfg);
  Eigen::MatrixXd tri(cfg.n_mels, bins);
  row_peak->assign(static_cast<std::size_t>(cfg.n_mels), 0.0);
  for (Index m = 0; m < cfg.n_mels; ++m) {
    double peak = 0.0;
    for (Index k = 0; k < bins; ++k) peak = std::max(peak, fb[static_cast<std::size_t>(m * bins + k)]);
    if (peak <= 0.0) peak = 1.0;
    (*row_peak)[static_cast<std::size_t>(m)] = peak;
    for (Index k = 0; k < bins; ++k) tri(m, k) = fb[static_cast<std::size_t>(m * bins + k)] / peak;
  }
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(bins - 2, bins);
  for (Index k = 0; k + 2 < bins; ++k) {
    diff(k, k) = 1.0;
    diff(k, k + 1) = -2.0;
    diff(k, k + 2) = 1.0;
  }
  const Eigen::MatrixXd normal = tri.transpose() * tri + kSmoothness * diff.transpose() * diff;
  return normal.ldlt().solve(tri.transpose());
}

class Stft {
 public:
  Stft(const MelConfig& cfg, Index frames)
      : cfg_(cfg), frames_(frames), bins_(cfg.n_fft / 2 + 1), len_(frames * cfg.hop),
        window_(analysis_window(cfg)), fft_(cfg.n_fft), norm_(static_cast<std::size_t>(len_), 0.0) {
    for (Index t = 0; t < frames_; ++t)
      for (Index j = 0; j < cfg_.n_fft; ++j) {
        const Index p = t * cfg_.hop - cfg_.n_fft / 2 + j;
        if (p >= 0 && p < len_) norm_[static_cast<std::size_t>(p)] += window_[static_cast<std::size_t>(j)] * window_[static_cast<std::size_t>(j)];
      }
  }

  Index length() const { return len_; }

  std::vector<double> inverse(const std::vector<Complex>& spec) const {
    std::vector<double> y(static_cast<std::size_t>(len_), 0.0);
    std::vector<double> buf(static_cast<std::size_t>(cfg_.n_fft));
    const double scale = 1.0 / static_cast<double>(cfg_.n_fft);
    for (Index t = 0; t < frames_; ++t) {
      fft_.inverse(spec.data() + t * bins_, buf.data());
      for (Index j = 0; j < cfg_.n_fft; ++j) {
        const Index p = t * cfg_.hop - cfg_.n_fft / 2 + j;
        if (p >= 0 && p < len_)
          y[static_cast<std::size_t>(p)] += window_[static_cast<std::size_t>(j)] * buf[static_cast<std::size_t>(j)] * scale;
      }
    }
    for (Index p = 0; p < len_; ++p) {
      const double n = norm_[static_cast<std::size_t>(p)];
      y[static_cast<std::size_t>(p)] = n > 1e-8 ? y[static_cast<std::size_t>(p)] / n : 0.0;
    }
    return y;
  }

  std::vector<Complex> forward(const std::vector<double>& y) const {
    std::vector<Complex> spec(static_cast<std::size_t>(frames_ * bins_));
#pragma omp parallel
    {
      std::vector<double> buf(static_cast<std::size_t>(cfg_.n_fft));
#pragma omp for schedule(static)
      for (Index t = 0; t < frames_; ++t) {
        const Index start = t * cfg_.hop - cfg_.n_fft / 2;
        for (Index j = 0; j < cfg_.n_fft; ++j) {
          Index p = start + j;
          // Mirror padding matches the analysis STFT.
          const Index period = 2 * (len_ - 1);
          p %= period;
          if (p < 0) p += period;
          if (p >= len_) p = period - p;
          buf[static_cast<std::size_t>(j)] = window_[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(p)];
        }
        fft_.forward(buf.data(), spec.data() + t * bins_);
      }
    }
    return spec;
  }

 private:
  MelConfig cfg_;
  Index frames_, bins_, len_;
  std::vector<double> window_;
  RealFft fft_;
  std::vector<double> norm_;
};

// Phase of each bin follows the nearest spectral peak; bins around a peak
// carry the alternating sign of a window centered mid-frame.
std::vector<double> peak_locked_phase(const std::vector<double>& mag, Index frames, Index bins, Index n_fft,
                                      Index hop) {
  std::vector<double> phase(mag.size(), 0.0);
  std::vector<double> accum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> peak_freq;
  std::vector<Index> peaks;
  for (Index t = 0; t < frames; ++t) {
    const double* s = mag.data() + t * bins;
    const double top = *std::max_element(s, s + bins);
    peaks.clear();
    peak_freq.clear();
    for (Index k = 1; k + 1 < bins; ++k)
      if (s[k] > s[k - 1] && s[k] >= s[k + 1] && s[k] > 1e-3 * top) {
        const double a = std::log(s[k - 1] + 1e-12), b = std::log(s[k] + 1e-12), c = std::log(s[k + 1] + 1e-12);
        const double den = a - 2.0 * b + c;
        const double off = std::abs(den) > 1e-12 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
        peaks.push_back(k);
        peak_freq.push_back(static_cast<double>(k) + off);
      }
    std::size_t nearest = 0;
    for (Index k = 0; k < bins; ++k) {
      double f = static_cast<double>(k);
      if (!peaks.empty()) {
        while (nearest + 1 < peaks.size() &&
               std::abs(peaks[nearest + 1] - k) <= std::abs(peaks[nearest] - k))
          ++nearest;
        f = peak_freq[nearest];
      }
      accum[static_cast<std::size_t>(k)] += 2.0 * std::numbers::pi * f * static_cast<double>(hop) / static_cast<double>(n_fft);
      phase[static_cast<std::size_t>(t * bins + k)] =
          accum[static_cast<std::size_t>(k)] - std::numbers::pi * (static_cast<double>(k) - f);
    }
  }
  return phase;
}

}  // namespace

Waveform griffin_lim(const MelSpectrogram& mel, int iterations, const MelConfig& cfg, GriffinLimTrace* trace) {
  if (mel.bins != cfg.n_mels) throw InputError("mel bins do not match configuration");
  if (mel.frames <= 0) throw InputError("empty mel spectrogram");
  if (iterations < 1) throw ConfigError("iteration count must be at least 1");
  const Index bins = cfg.n_fft / 2 + 1;
  const Index frames = mel.frames;

  std::vector<double> row_peak;
  const Eigen::MatrixXd inv = mel_inverse(cfg, &row_peak);
  std::vector<double> target(static_cast<std::size_t>(frames * bins));
  Eigen::VectorXd energy(cfg.n_mels);
  for (Index t = 0; t < frames; ++t) {
    for (Index m = 0; m < cfg.n_mels; ++m)
      energy(m) = std::exp(denormalize_log_mel(mel.at(t, m), cfg)) / row_peak[static_cast<std::size_t>(m)];
    const Eigen::VectorXd lin = inv * energy;
    for (Index k = 0; k < bins; ++k) target[static_cast<std::size_t>(t * bins + k)] = std::max(0.0, lin(k));
  }
  double target_norm = 0.0;
  for (double v : target) target_norm += v * v;
  target_norm = std::sqrt(target_norm);

  const Stft stft(cfg, frames);
  const std::vector<double> phase0 = peak_locked_phase(target, frames, bins, cfg.n_fft, cfg.hop);
  std::vector<Complex> spec(target.size());
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::polar(target[i], phase0[i]);

  std::vector<double> y = stft.inverse(spec);
  for (int it = 0; it < iterations; ++it) {
    const std::vector<Complex> est = stft.forward(y);
    double err = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double a = std::abs(est[i]);
      err += (a - target[i]) * (a - target[i]);
      spec[i] = a > 1e-12 ? target[i] * est[i] / a : Complex(target[i], 0.0);
    }
    if (trace) trace->spectral_convergence.push_back(target_norm > 0 ? std::sqrt(err) / target_norm : 0.0);
    y = stft.inverse(spec);
  }

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples = std::move(y);
  for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  return out;
}

}  // namespace lipspeech::media
