// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// Built with relaxed floating-point flags so the loop maps onto the vector
// math library.

#include <cmath>

#include "lipspeech/kernels.hpp"

namespace lipspeech::kernels {

void exp_inplace(double* x, Index n) {
#pragma omp simd
  for (Index i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

}  // namespace lipspeech::kernels
