// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Parameter-owning building blocks shared by the model components.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lipspeech/ops.hpp"
#include "lipspeech/rng.hpp"
#include "lipspeech/tensor.hpp"

namespace lipspeech::nn {

using lipspeech::Rng;

/// name -> tensor handle (shares storage with the owning module).
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

Tensor uniform(Shape shape, double bound, Rng& rng);
Tensor normal(Shape shape, double stddev, Rng& rng);

class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  /// Trainable tensors with dotted hierarchical names.
  NamedTensors named_parameters() const;
  /// Non-trainable state (fixed random projections).
  NamedTensors named_buffers() const;
  std::vector<Tensor> parameters() const;
  Index parameter_count() const;

 protected:
  Tensor add_parameter(std::string name, Tensor t);
  Tensor add_buffer(std::string name, Tensor t);
  void add_child(std::string name, Module& child);

 private:
  void collect(const std::string& prefix, NamedTensors& out, bool buffers) const;

  NamedTensors params_;
  NamedTensors buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
};

class Linear : public Module {
 public:
  Linear(Index in, Index out, bool bias, Rng& rng);
  Tensor forward(const Tensor& x) const { return ops::linear(x, weight_, bias_); }
  Index in_features() const { return weight_.dim(0); }
  Index out_features() const { return weight_.dim(1); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;
};

class LayerNorm : public Module {
 public:
  explicit LayerNorm(Index dim);
  Tensor forward(const Tensor& x) const { return ops::layer_norm_last(x, gamma_, beta_); }

 private:
  Tensor gamma_, beta_;
};

struct Conv1dOptions {
  Index stride = 1, padding = 0, dilation = 1, groups = 1;
  bool bias = true;
};

class Conv1d : public Module {
 public:
  Conv1d(Index in, Index out, Index kernel, Conv1dOptions opt, Rng& rng);
  /// x: [B, in, L]
  Tensor forward(const Tensor& x) const;
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Conv1dOptions& options() const { return opt_; }
  Index kernel() const { return weight_.dim(2); }

 private:
  Conv1dOptions opt_;
  Tensor weight_, bias_;
};

class ConvTranspose1d : public Module {
 public:
  ConvTranspose1d(Index in, Index out, Index kernel, Index stride, Index padding, Rng& rng);
  Tensor forward(const Tensor& x) const;

 private:
  Index stride_, padding_;
  Tensor weight_, bias_;
};

/// Softmax multi-head self-attention over x: [B, L, d].
class MultiHeadAttention : public Module {
 public:
  MultiHeadAttention(Index dim, Index heads, Rng& rng);
  Tensor forward(const Tensor& x) const;
  Index heads() const { return heads_; }

 private:
  Index dim_, heads_;
  Linear q_, k_, v_, o_;
};

/// Standard sinusoidal position table [len, dim].
Tensor sinusoidal_encoding(Index len, Index dim);

/// Splits [B, L, h*dh] into [B, h, L, dh].
Tensor split_heads(const Tensor& x, Index heads);
/// Inverse of split_heads.
Tensor merge_heads(const Tensor& x);

}  // namespace lipspeech::nn
