// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Dense numeric kernels. Every kernel exists twice: an OpenMP-parallel,
// cache-blocked version in `lipspeech::kernels` used by the model, and a
// straightforward serial version in `lipspeech::kernels::reference` kept as the
// test oracle. Both share signatures and accumulate semantics.
//
// All buffers are row-major, contiguous, double precision.

#include <cstdint>

namespace lipspeech::kernels {

using Index = std::int64_t;

/// C = alpha * op(A) * op(B) + beta * C, op(A) is m x k, op(B) is k x n.
/// lda/ldb are the row strides of A and B as stored.
struct GemmShape {
  Index m = 0, n = 0, k = 0;
  bool trans_a = false, trans_b = false;
};

/// 1-D convolution over [batch, channels, length] tensors.
/// Weight layout: [out_ch, in_ch / groups, kernel].
struct Conv1dGeom {
  Index batch = 1, in_ch = 1, out_ch = 1, in_len = 1;
  Index kernel = 1, stride = 1, padding = 0, dilation = 1, groups = 1;

  Index out_len() const {
    return (in_len + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
};

/// 3-D convolution over a channels-last clip [T, H, W, in_ch], producing
/// [T', H', W', out_ch]. Weight layout: [out_ch, in_ch, kt, kh, kw].
struct Conv3dGeom {
  Index in_ch = 1, out_ch = 1;
  Index t = 1, h = 1, w = 1;
  Index kt = 1, kh = 1, kw = 1;
  Index st = 1, sh = 1, sw = 1;
  Index pt = 0, ph = 0, pw = 0;

  Index out_t() const { return (t + 2 * pt - kt) / st + 1; }
  Index out_h() const { return (h + 2 * ph - kh) / sh + 1; }
  Index out_w() const { return (w + 2 * pw - kw) / sw + 1; }
};

void gemm(const GemmShape& s, double alpha, const double* a, const double* b,
          double beta, double* c);

// y = conv(x, w) + bias (bias may be null). Overwrites y.
void conv1d_forward(const Conv1dGeom& g, const double* x, const double* w,
                    const double* bias, double* y);
// gx += d/dx. Accumulates.
void conv1d_backward_input(const Conv1dGeom& g, const double* gy,
                           const double* w, double* gx);
// gw += d/dw. Accumulates.
void conv1d_backward_weight(const Conv1dGeom& g, const double* gy,
                            const double* x, double* gw);

void conv3d_forward(const Conv3dGeom& g, const double* x, const double* w,
                    const double* bias, double* y);
void conv3d_backward_input(const Conv3dGeom& g, const double* gy,
                           const double* w, double* gx);
void conv3d_backward_weight(const Conv3dGeom& g, const double* gy,
                            const double* x, double* gw);

/// x[i] = exp(x[i]) with a vectorized exponential (a few ulp).
void exp_inplace(double* x, Index n);

namespace reference {

void gemm(const GemmShape& s, double alpha, const double* a, const double* b,
          double beta, double* c);

void conv1d_forward(const Conv1dGeom& g, const double* x, const double* w,
                    const double* bias, double* y);
void conv1d_backward_input(const Conv1dGeom& g, const double* gy,
                           const double* w, double* gx);
void conv1d_backward_weight(const Conv1dGeom& g, const double* gy,
                            const double* x, double* gw);

void conv3d_forward(const Conv3dGeom& g, const double* x, const double* w,
                    const double* bias, double* y);
void conv3d_backward_input(const Conv3dGeom& g, const double* gy,
                           const double* w, double* gx);
void conv3d_backward_weight(const Conv3dGeom& g, const double* gy,
                            const double* x, double* gw);

void exp_inplace(double* x, Index n);

}  // namespace reference

}  // namespace lipspeech::kernels
