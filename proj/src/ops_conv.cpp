// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <limits>

#include "lipspeech/error.hpp"
#include "lipspeech/kernels.hpp"
#include "lipspeech/ops.hpp"

namespace lipspeech::ops {

using detail::Node;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InternalError(what);
}

void add_bias_channels(double* y, const double* bias, Index batch, Index ch, Index len) {
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < ch; ++c) {
      double* row = y + (b * ch + c) * len;
      for (Index t = 0; t < len; ++t) row[t] += bias[c];
    }
}

void bias_grad_channels(const double* g, double* gb, Index batch, Index ch, Index len) {
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < ch; ++c) {
      const double* row = g + (b * ch + c) * len;
      double s = 0.0;
      for (Index t = 0; t < len; ++t) s += row[t];
      gb[c] += s;
    }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, Index stride,
              Index padding, Index dilation, Index groups) {
  require(x.rank() == 3 && w.rank() == 3, "conv1d: expects x [B,C,L], w [O,C/g,K]");
  kernels::Conv1dGeom g;
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.in_len = x.dim(2);
  g.out_ch = w.dim(0);
  g.kernel = w.dim(2);
  g.stride = stride;
  g.padding = padding;
  g.dilation = dilation;
  g.groups = groups;
  require(g.in_ch % groups == 0 && g.out_ch % groups == 0 && w.dim(1) == g.in_ch / groups,
          "conv1d: channel/group mismatch x " + shape_str(x.shape()) + " w " +
              shape_str(w.shape()));
  const Index lout = g.out_len();
  require(lout >= 1, "conv1d: input too short " + shape_str(x.shape()));
  const bool has_bias = bias.defined();
  std::vector<double> out(static_cast<std::size_t>(g.batch * g.out_ch * lout));
  kernels::conv1d_forward(g, x.data().data(), w.data().data(),
                          has_bias ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result({g.batch, g.out_ch, lout}, std::move(out), std::move(inputs),
                     [g, has_bias, lout](Node& self) {
                       const double* gy = self.grad.data();
                       if (double* gx = self.input_grad(0))
                         kernels::conv1d_backward_input(g, gy, self.input_value(1), gx);
                       if (double* gw = self.input_grad(1))
                         kernels::conv1d_backward_weight(g, gy, self.input_value(0), gw);
                       if (has_bias)
                         if (double* gb = self.input_grad(2))
                           bias_grad_channels(gy, gb, g.batch, g.out_ch, lout);
                     });
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias, Index stride,
                        Index padding) {
  require(x.rank() == 3 && w.rank() == 3 && x.dim(1) == w.dim(0),
          "conv_transpose1d: x " + shape_str(x.shape()) + " w " + shape_str(w.shape()));
  const Index lin = x.dim(2);
  const Index lout = (lin - 1) * stride - 2 * padding + w.dim(2);
  require(lout >= 1, "conv_transpose1d: empty output");
  // The adjoint of a conv1d mapping [Cout, lout] -> [Cin, lin].
  kernels::Conv1dGeom g;
  g.batch = x.dim(0);
  g.in_ch = w.dim(1);
  g.out_ch = w.dim(0);
  g.in_len = lout;
  g.kernel = w.dim(2);
  g.stride = stride;
  g.padding = padding;
  require(g.out_len() == lin, "conv_transpose1d: inconsistent geometry");
  const bool has_bias = bias.defined();
  std::vector<double> out(static_cast<std::size_t>(g.batch * g.in_ch * lout), 0.0);
  kernels::conv1d_backward_input(g, x.data().data(), w.data().data(), out.data());
  if (has_bias) add_bias_channels(out.data(), bias.data().data(), g.batch, g.in_ch, lout);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      {g.batch, g.in_ch, lout}, std::move(out), std::move(inputs),
      [g, has_bias, lin, lout](Node& self) {
        const double* gy = self.grad.data();
        if (double* gx = self.input_grad(0)) {
          std::vector<double> tmp(static_cast<std::size_t>(g.batch * g.out_ch * lin));
          kernels::conv1d_forward(g, gy, self.input_value(1), nullptr, tmp.data());
          for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        }
        if (double* gw = self.input_grad(1))
          kernels::conv1d_backward_weight(g, self.input_value(0), gy, gw);
        if (has_bias)
          if (double* gb = self.input_grad(2)) bias_grad_channels(gy, gb, g.batch, g.in_ch, lout);
      });
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv3dParams& p) {
  require(x.rank() == 4 && w.rank() == 5 && x.dim(3) == w.dim(1),
          "conv3d: x " + shape_str(x.shape()) + " w " + shape_str(w.shape()));
  kernels::Conv3dGeom g;
  g.t = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.in_ch = x.dim(3);
  g.out_ch = w.dim(0);
  g.kt = w.dim(2);
  g.kh = w.dim(3);
  g.kw = w.dim(4);
  g.st = p.st;
  g.sh = p.sh;
  g.sw = p.sw;
  g.pt = p.pt;
  g.ph = p.ph;
  g.pw = p.pw;
  require(g.out_t() >= 1 && g.out_h() >= 1 && g.out_w() >= 1, "conv3d: empty output");
  const bool has_bias = bias.defined();
  Shape shape{g.out_t(), g.out_h(), g.out_w(), g.out_ch};
  std::vector<double> out(static_cast<std::size_t>(numel(shape)));
  kernels::conv3d_forward(g, x.data().data(), w.data().data(),
                          has_bias ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(shape), std::move(out), std::move(inputs),
                     [g, has_bias](Node& self) {
                       const double* gy = self.grad.data();
                       if (double* gx = self.input_grad(0))
                         kernels::conv3d_backward_input(g, gy, self.input_value(1), gx);
                       if (double* gw = self.input_grad(1))
                         kernels::conv3d_backward_weight(g, gy, self.input_value(0), gw);
                       if (has_bias)
                         if (double* gb = self.input_grad(2)) {
                           const Index n = g.out_t() * g.out_h() * g.out_w();
                           for (Index i = 0; i < n; ++i)
                             for (Index c = 0; c < g.out_ch; ++c) gb[c] += gy[i * g.out_ch + c];
                         }
                     });
}

Tensor max_pool2d(const Tensor& x, Index k) {
  require(x.rank() == 4, "max_pool2d expects [T,H,W,C]");
  const Index t = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const Index oh = h / k, ow = w / k;
  require(oh >= 1 && ow >= 1, "max_pool2d: input smaller than window");
  const Index n = t * oh * ow * c;
  std::vector<double> out(static_cast<std::size_t>(n));
  auto arg = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(n));
  const double* xv = x.data().data();
#pragma omp parallel for if (n > 32768)
  for (Index f = 0; f < t; ++f)
    for (Index y = 0; y < oh; ++y)
      for (Index xo = 0; xo < ow; ++xo)
        for (Index ch = 0; ch < c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          Index bi = 0;
          for (Index a = 0; a < k; ++a)
            for (Index b = 0; b < k; ++b) {
              const Index i = ((f * h + y * k + a) * w + xo * k + b) * c + ch;
              if (xv[i] > best) {
                best = xv[i];
                bi = i;
              }
            }
          const Index o = ((f * oh + y) * ow + xo) * c + ch;
          out[o] = best;
          (*arg)[o] = bi;
        }
  return make_result({t, oh, ow, c}, std::move(out), {x}, [arg, n](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (Index o = 0; o < n; ++o) gx[(*arg)[o]] += self.grad[o];
  });
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.rank() == 4 && w.rank() == 3 && w.dim(0) == x.dim(3) && w.dim(1) == w.dim(2) &&
              w.dim(1) % 2 == 1,
          "depthwise_conv2d: x " + shape_str(x.shape()) + " w " + shape_str(w.shape()));
  const Index t = x.dim(0), h = x.dim(1), wd = x.dim(2), c = x.dim(3), k = w.dim(1);
  const Index pad = k / 2;
  const bool has_bias = bias.defined();
  std::vector<double> out(static_cast<std::size_t>(x.numel()));
  const double* xv = x.data().data();
  const double* wv = w.data().data();
  const double* bv = has_bias ? bias.data().data() : nullptr;
  auto visit = [=](auto&& f) {
#pragma omp parallel for if (t > 1)
    for (Index fr = 0; fr < t; ++fr)
      for (Index y = 0; y < h; ++y)
        for (Index xo = 0; xo < wd; ++xo)
          for (Index a = 0; a < k; ++a) {
            const Index iy = y + a - pad;
            if (iy < 0 || iy >= h) continue;
            for (Index b = 0; b < k; ++b) {
              const Index ix = xo + b - pad;
              if (ix < 0 || ix >= wd) continue;
              const Index o = ((fr * h + y) * wd + xo) * c;
              const Index i = ((fr * h + iy) * wd + ix) * c;
              f(fr, o, i, a * k + b);
            }
          }
  };
  for (Index p = 0; p < t * h * wd; ++p)
    for (Index ch = 0; ch < c; ++ch) out[p * c + ch] = bv ? bv[ch] : 0.0;
  visit([&](Index, Index o, Index i, Index tap) {
    for (Index ch = 0; ch < c; ++ch) out[o + ch] += wv[ch * k * k + tap] * xv[i + ch];
  });
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(x.shape(), std::move(out), std::move(inputs),
                     [=](Node& self) {
                       const double* g = self.grad.data();
                       const double* xv = self.input_value(0);
                       const double* wv = self.input_value(1);
                       double* gx = self.input_grad(0);
                       double* gw = self.input_grad(1);
                       // Frames write disjoint gx ranges; gw gets a per-frame
                       // partial reduced afterwards.
                       std::vector<double> gw_frames(
                           gw ? static_cast<std::size_t>(t * c * k * k) : 0, 0.0);
                       visit([&](Index fr, Index o, Index i, Index tap) {
                         for (Index ch = 0; ch < c; ++ch) {
                           if (gx) gx[i + ch] += g[o + ch] * wv[ch * k * k + tap];
                           if (gw)
                             gw_frames[(fr * c + ch) * k * k + tap] += g[o + ch] * xv[i + ch];
                         }
                       });
                       if (gw)
                         for (Index fr = 0; fr < t; ++fr)
                           for (Index j = 0; j < c * k * k; ++j) gw[j] += gw_frames[fr * c * k * k + j];
                       if (has_bias)
                         if (double* gb = self.input_grad(2))
                           for (Index p = 0; p < t * h * wd; ++p)
                             for (Index ch = 0; ch < c; ++ch) gb[ch] += g[p * c + ch];
                     });
}

Tensor avg_pool1d(const Tensor& x, Index kernel, Index stride, Index padding) {
  require(x.rank() == 3, "avg_pool1d expects [B,C,L]");
  const Index rows = x.dim(0) * x.dim(1), len = x.dim(2);
  const Index lout = (len + 2 * padding - kernel) / stride + 1;
  require(lout >= 1, "avg_pool1d: input too short");
  std::vector<double> out(static_cast<std::size_t>(rows * lout), 0.0);
  const double* xv = x.data().data();
  const double inv = 1.0 / static_cast<double>(kernel);
  for (Index r = 0; r < rows; ++r)
    for (Index t = 0; t < lout; ++t) {
      double s = 0.0;
      for (Index j = 0; j < kernel; ++j) {
        const Index i = t * stride + j - padding;
        if (i >= 0 && i < len) s += xv[r * len + i];
      }
      out[r * lout + t] = s * inv;
    }
  return make_result({x.dim(0), x.dim(1), lout}, std::move(out), {x},
                     [=](Node& self) {
                       double* gx = self.input_grad(0);
                       if (!gx) return;
                       for (Index r = 0; r < rows; ++r)
                         for (Index t = 0; t < lout; ++t) {
                           const double g = self.grad[r * lout + t] * inv;
                           for (Index j = 0; j < kernel; ++j) {
                             const Index i = t * stride + j - padding;
                             if (i >= 0 && i < len) gx[r * len + i] += g;
                           }
                         }
                     });
}

}  // namespace lipspeech::ops
