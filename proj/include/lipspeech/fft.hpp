// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <complex>
#include <cstdint>
#include <memory>

namespace lipspeech {

/// Real-input FFT of a fixed size backed by FFTW. Plans are created once per
/// size and shared; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::int64_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::int64_t size() const { return n_; }
  std::int64_t bins() const { return n_ / 2 + 1; }

  /// out[0..bins) = sum_j in[j] exp(-2 pi i j k / n)
  void forward(const double* in, std::complex<double>* out) const;
  /// Unnormalized inverse: out[j] = sum over the Hermitian spectrum. Divide by
  /// n for the true inverse.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  struct Plans;
  std::int64_t n_;
  std::shared_ptr<Plans> plans_;
};

}  // namespace lipspeech
