// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// Serial reference kernels. Deliberately naive; used as test oracles for the
// parallel kernels and as the baseline in bench_kernels.

#include <cmath>
#include "lipspeech/kernels.hpp"

namespace lipspeech::kernels::reference {

void gemm(const GemmShape& s, double alpha, const double* a, const double* b,
          double beta, double* c) {
  for (Index i = 0; i < s.m; ++i) {
    for (Index j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (Index p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.m + i] : a[i * s.k + p];
        const double bv = s.trans_b ? b[j * s.k + p] : b[p * s.n + j];
        acc += av * bv;
      }
      double& out = c[i * s.n + j];
      out = (beta == 0.0 ? 0.0 : beta * out) + alpha * acc;
    }
  }
}

void conv1d_forward(const Conv1dGeom& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  for (Index b = 0; b < g.batch; ++b) {
    for (Index co = 0; co < g.out_ch; ++co) {
      const Index grp = co / cout_g;
      for (Index t = 0; t < lout; ++t) {
        double acc = bias ? bias[co] : 0.0;
        for (Index ci = 0; ci < cin_g; ++ci) {
          const Index cin = grp * cin_g + ci;
          for (Index k = 0; k < g.kernel; ++k) {
            const Index ix = t * g.stride + k * g.dilation - g.padding;
            if (ix < 0 || ix >= g.in_len) continue;
            acc += w[(co * cin_g + ci) * g.kernel + k] *
                   x[(b * g.in_ch + cin) * g.in_len + ix];
          }
        }
        y[(b * g.out_ch + co) * lout + t] = acc;
      }
    }
  }
}

void conv1d_backward_input(const Conv1dGeom& g, const double* gy,
                           const double* w, double* gx) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  for (Index b = 0; b < g.batch; ++b)
    for (Index co = 0; co < g.out_ch; ++co) {
      const Index grp = co / cout_g;
      for (Index t = 0; t < lout; ++t) {
        const double go = gy[(b * g.out_ch + co) * lout + t];
        for (Index ci = 0; ci < cin_g; ++ci)
          for (Index k = 0; k < g.kernel; ++k) {
            const Index ix = t * g.stride + k * g.dilation - g.padding;
            if (ix < 0 || ix >= g.in_len) continue;
            gx[(b * g.in_ch + grp * cin_g + ci) * g.in_len + ix] +=
                go * w[(co * cin_g + ci) * g.kernel + k];
          }
      }
    }
}

void conv1d_backward_weight(const Conv1dGeom& g, const double* gy,
                            const double* x, double* gw) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  for (Index b = 0; b < g.batch; ++b)
    for (Index co = 0; co < g.out_ch; ++co) {
      const Index grp = co / cout_g;
      for (Index t = 0; t < lout; ++t) {
        const double go = gy[(b * g.out_ch + co) * lout + t];
        for (Index ci = 0; ci < cin_g; ++ci)
          for (Index k = 0; k < g.kernel; ++k) {
            const Index ix = t * g.stride + k * g.dilation - g.padding;
            if (ix < 0 || ix >= g.in_len) continue;
            gw[(co * cin_g + ci) * g.kernel + k] +=
                go * x[(b * g.in_ch + grp * cin_g + ci) * g.in_len + ix];
          }
      }
    }
}

namespace {

template <class Visit>
void for_each_tap(const Conv3dGeom& g, Visit&& visit) {
  const Index ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (Index t = 0; t < ot; ++t)
    for (Index y = 0; y < oh; ++y)
      for (Index x = 0; x < ow; ++x)
        for (Index co = 0; co < g.out_ch; ++co)
          for (Index ci = 0; ci < g.in_ch; ++ci)
            for (Index a = 0; a < g.kt; ++a)
              for (Index b = 0; b < g.kh; ++b)
                for (Index c = 0; c < g.kw; ++c) {
                  const Index it = t * g.st + a - g.pt;
                  const Index iy = y * g.sh + b - g.ph;
                  const Index ix = x * g.sw + c - g.pw;
                  if (it < 0 || it >= g.t || iy < 0 || iy >= g.h || ix < 0 ||
                      ix >= g.w)
                    continue;
                  const Index out_idx = ((t * oh + y) * ow + x) * g.out_ch + co;
                  const Index in_idx = ((it * g.h + iy) * g.w + ix) * g.in_ch + ci;
                  const Index w_idx =
                      (((co * g.in_ch + ci) * g.kt + a) * g.kh + b) * g.kw + c;
                  visit(out_idx, in_idx, w_idx);
                }
}

}  // namespace

void conv3d_forward(const Conv3dGeom& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const Index n = g.out_t() * g.out_h() * g.out_w();
  for (Index p = 0; p < n; ++p)
    for (Index co = 0; co < g.out_ch; ++co)
      y[p * g.out_ch + co] = bias ? bias[co] : 0.0;
  for_each_tap(g, [&](Index o, Index i, Index k) { y[o] += w[k] * x[i]; });
}

void conv3d_backward_input(const Conv3dGeom& g, const double* gy,
                           const double* w, double* gx) {
  for_each_tap(g, [&](Index o, Index i, Index k) { gx[i] += w[k] * gy[o]; });
}

void conv3d_backward_weight(const Conv3dGeom& g, const double* gy,
                            const double* x, double* gw) {
  for_each_tap(g, [&](Index o, Index i, Index k) { gw[k] += x[i] * gy[o]; });
}

}  // namespace lipspeech::kernels::reference

namespace lipspeech::kernels::reference {

void exp_inplace(double* x, Index n) {
  for (Index i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

}  // namespace lipspeech::kernels::reference
