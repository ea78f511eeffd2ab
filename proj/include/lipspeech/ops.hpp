// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Differentiable tensor operations. Shapes follow the conventions noted per
// op; violations throw InternalError.

#include <vector>

#include "lipspeech/tensor.hpp"

namespace lipspeech::ops {

// Elementwise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);

Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor gelu(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces the last axis, keeping it with size 1.
Tensor sum_last(const Tensor& x);

/// a: [..., n, k]; b: [k, m] (shared) or [..., k, m]. With trans_b, b holds
/// [..., m, k] and is used transposed.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b = false);
/// x: [..., in], w: [in, out], bias: [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor softmax_last(const Tensor& x);
Tensor layer_norm_last(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

/// One axis may be -1.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor transpose(const Tensor& x, int a, int b);
Tensor slice(const Tensor& x, int axis, Index begin, Index end);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Gathers rows of axis 0.
Tensor index_select0(const Tensor& x, const std::vector<Index>& rows);

enum class PadMode { kZero, kReflect };
Tensor pad_last(const Tensor& x, Index left, Index right, PadMode mode);

/// x: [B, Cin, L]; w: [Cout, Cin/groups, K]; bias [Cout] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, Index stride = 1,
              Index padding = 0, Index dilation = 1, Index groups = 1);
/// x: [B, Cin, L]; w: [Cin, Cout, K]. Output length (L-1)*stride - 2*padding + K.
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        Index stride, Index padding);
/// x: [T, H, W, Cin] channels-last; w: [Cout, Cin, kt, kh, kw].
struct Conv3dParams {
  Index st = 1, sh = 1, sw = 1;
  Index pt = 0, ph = 0, pw = 0;
};
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv3dParams& p);
/// x: [T, H, W, C]; non-overlapping k x k max pool over H, W.
Tensor max_pool2d(const Tensor& x, Index k);
/// x: [T, H, W, C]; w: [C, k, k] with odd k, same padding.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);
/// x: [B, C, L]; zero padding counted in the average.
Tensor avg_pool1d(const Tensor& x, Index kernel, Index stride, Index padding);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace lipspeech::ops
