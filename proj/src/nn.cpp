// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/nn.hpp"

#include <cmath>

#include "lipspeech/error.hpp"

namespace lipspeech::nn {

Tensor uniform(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor normal(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

NamedTensors Module::named_parameters() const {
  NamedTensors out;
  collect("", out, false);
  return out;
}

NamedTensors Module::named_buffers() const {
  NamedTensors out;
  collect("", out, true);
  return out;
}

std::vector<Tensor> Module::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

Index Module::parameter_count() const {
  Index n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

Tensor Module::add_parameter(std::string name, Tensor t) {
  t.set_requires_grad(true);
  params_.emplace_back(std::move(name), t);
  return t;
}

Tensor Module::add_buffer(std::string name, Tensor t) {
  buffers_.emplace_back(std::move(name), t);
  return t;
}

void Module::add_child(std::string name, Module& child) {
  children_.emplace_back(std::move(name), &child);
}

void Module::collect(const std::string& prefix, NamedTensors& out, bool buffers) const {
  for (const auto& [name, t] : buffers ? buffers_ : params_) out.emplace_back(prefix + name, t);
  for (const auto& [name, child] : children_) child->collect(prefix + name + ".", out, buffers);
}

Linear::Linear(Index in, Index out, bool bias, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = add_parameter("weight", uniform({in, out}, bound, rng));
  if (bias) bias_ = add_parameter("bias", uniform({out}, bound, rng));
}

LayerNorm::LayerNorm(Index dim) {
  gamma_ = add_parameter("weight", Tensor({dim}, 1.0));
  beta_ = add_parameter("bias", Tensor({dim}, 0.0));
}

Conv1d::Conv1d(Index in, Index out, Index kernel, Conv1dOptions opt, Rng& rng) : opt_(opt) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in / opt.groups * kernel));
  weight_ = add_parameter("weight", uniform({out, in / opt.groups, kernel}, bound, rng));
  if (opt.bias) bias_ = add_parameter("bias", uniform({out}, bound, rng));
}

Tensor Conv1d::forward(const Tensor& x) const {
  return ops::conv1d(x, weight_, bias_, opt_.stride, opt_.padding, opt_.dilation,
                     opt_.groups);
}

ConvTranspose1d::ConvTranspose1d(Index in, Index out, Index kernel, Index stride,
                                 Index padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(out * kernel));
  weight_ = add_parameter("weight", uniform({in, out, kernel}, bound, rng));
  bias_ = add_parameter("bias", uniform({out}, bound, rng));
}

Tensor ConvTranspose1d::forward(const Tensor& x) const {
  return ops::conv_transpose1d(x, weight_, bias_, stride_, padding_);
}

MultiHeadAttention::MultiHeadAttention(Index dim, Index heads, Rng& rng)
    : dim_(dim),
      heads_(heads),
      q_(dim, dim, true, rng),
      k_(dim, dim, true, rng),
      v_(dim, dim, true, rng),
      o_(dim, dim, true, rng) {
  if (heads <= 0 || dim % heads != 0)
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  add_child("q", q_);
  add_child("k", k_);
  add_child("v", v_);
  add_child("o", o_);
}

Tensor split_heads(const Tensor& x, Index heads) {
  const Index b = x.dim(0), l = x.dim(1), d = x.dim(2);
  return ops::permute(ops::reshape(x, {b, l, heads, d / heads}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
  const Index b = x.dim(0), h = x.dim(1), l = x.dim(2), dh = x.dim(3);
  return ops::reshape(ops::permute(x, {0, 2, 1, 3}), {b, l, h * dh});
}

Tensor MultiHeadAttention::forward(const Tensor& x) const {
  const Index dh = dim_ / heads_;
  Tensor q = split_heads(ops::mul_scalar(q_.forward(x), 1.0 / std::sqrt(static_cast<double>(dh))), heads_);
  Tensor k = split_heads(k_.forward(x), heads_);
  Tensor v = split_heads(v_.forward(x), heads_);
  Tensor scores = ops::matmul(q, k, true);
  Tensor ctx = ops::matmul(ops::softmax_last(scores), v);
  return o_.forward(merge_heads(ctx));
}

Tensor sinusoidal_encoding(Index len, Index dim) {
  Tensor pe({len, dim});
  auto v = pe.data();
  for (Index p = 0; p < len; ++p)
    for (Index i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      v[p * dim + i] = std::sin(static_cast<double>(p) * freq);
      if (i + 1 < dim) v[p * dim + i + 1] = std::cos(static_cast<double>(p) * freq);
    }
  return pe;
}

}  // namespace lipspeech::nn
