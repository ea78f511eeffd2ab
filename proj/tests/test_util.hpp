// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lipspeech/tensor.hpp"

namespace lipspeech::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                            bool requires_grad = false) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> d(0.0, scale);
  for (double& v : t.data()) v = d(rng);
  t.set_requires_grad(requires_grad);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

/// Norm-wise relative error between the analytic gradient of `loss` and a
/// central finite difference, maximized over `inputs`.
inline double gradient_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                             double h = 1e-6) {
  for (Tensor& t : inputs) t.zero_grad();
  loss().backward();
  double worst = 0.0;
  for (Tensor& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(analytic.size());
    auto v = t.data();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = loss().item();
      v[i] = keep - h;
      const double down = loss().item();
      v[i] = keep;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

struct JointGradientError {
  double relative = 0;      // over the concatenation of all inputs
  double max_absolute = 0;  // worst single entry
};

/// Like gradient_check, but measured over the concatenated gradient of all
/// inputs, so tensors whose exact gradient is zero do not dominate.
inline JointGradientError joint_gradient_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                               double h = 1e-6) {
  for (Tensor& t : inputs) t.zero_grad();
  loss().backward();
  double diff = 0.0, na = 0.0, nn = 0.0, worst = 0.0;
  for (Tensor& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto v = t.data();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = loss().item();
      v[i] = keep - h;
      const double down = loss().item();
      v[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
      worst = std::max(worst, std::fabs(analytic[i] - numeric));
    }
  }
  return {std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}), worst};
}

}  // namespace lipspeech::testing
