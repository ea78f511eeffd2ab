// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace lipspeech {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  std::int64_t n = 0;

  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

RealFft::RealFft(std::int64_t n) : n_(n) {
  static std::map<std::int64_t, std::weak_ptr<Plans>> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (auto hit = cache[n].lock()) {
    plans_ = hit;
    return;
  }
  auto p = std::make_shared<Plans>();
  p->n = n;
  double* in = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  p->r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  p->c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  cache[n] = p;
  plans_ = std::move(p);
}

RealFft::~RealFft() = default;

void RealFft::forward(const double* in, std::complex<double>* out) const {
  // New-array execute requires FFTW-aligned buffers; copy through scratch.
  double* buf = fftw_alloc_real(static_cast<std::size_t>(n_));
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(bins()));
  std::copy_n(in, n_, buf);
  fftw_execute_dft_r2c(plans_->r2c, buf, spec);
  for (std::int64_t k = 0; k < bins(); ++k) out[k] = {spec[k][0], spec[k][1]};
  fftw_free(buf);
  fftw_free(spec);
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
  double* buf = fftw_alloc_real(static_cast<std::size_t>(n_));
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(bins()));
  for (std::int64_t k = 0; k < bins(); ++k) {
    spec[k][0] = in[k].real();
    spec[k][1] = in[k].imag();
  }
  fftw_execute_dft_c2r(plans_->c2r, spec, buf);
  std::copy_n(buf, n_, out);
  fftw_free(buf);
  fftw_free(spec);
}

}  // namespace lipspeech
