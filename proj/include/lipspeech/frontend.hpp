// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Visual frontend: 3-D convolutional tokenizer, per-frame spatial transformer
// with random-feature linear attention and a convolutional feed-forward,
// concat-projection, and a softmax temporal transformer.

#include <array>
#include <memory>
#include <vector>

#include "lipspeech/media_io.hpp"
#include "lipspeech/nn.hpp"

namespace lipspeech {

struct FrontendConfig {
  Index frame_size = 96;
  std::array<Index, 3> conv_kernel{5, 5, 5};  // (t, h, w)
  std::array<Index, 3> conv_stride{1, 2, 2};
  std::array<Index, 3> conv_padding{2, 2, 2};
  Index pool = 2;
  Index d_token = 32;
  Index spatial_layers = 4;
  Index d_s = 36;
  Index h_s = 6;
  Index leff_expansion = 4;
  Index attention_features = 256;
  Index temporal_layers = 4;
  Index d_t = 384;
  Index h_t = 8;
  Index d_ff = 1536;
  /// One learned table for all frames; otherwise one per frame index up to max_frames.
  bool shared_position_embedding = true;
  Index max_frames = 300;

  /// Tokens per side of the per-frame grid.
  Index grid_size() const;
  Index tokens_per_frame() const { return grid_size() * grid_size(); }
  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
};

/// Orthogonal Gaussian random features [m, d]: stacked orthogonal blocks with
/// rows rescaled to chi-distributed norms.
Tensor orthogonal_features(Index m, Index d, Rng& rng);

/// Positive-random-feature estimate of softmax(q k^T / sqrt(d)) v.
/// q, k, v: [N, L, d]; features: [m, d].
Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& features);
/// Convenience overload drawing m features from seed.
Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, Index m, std::uint64_t seed);

class Tokenizer : public nn::Module {
 public:
  Tokenizer(const FrontendConfig& cfg, Rng& rng);
  /// video [T, H, W, 3] -> [T, N_s, d_token]
  Tensor forward(const Tensor& video) const;

 private:
  FrontendConfig cfg_;
  Tensor conv_w_, conv_b_;
  nn::LayerNorm norm_;
  Tensor position_;
};

/// Multi-head linear attention; the random features are fixed buffers.
class LinearSelfAttention : public nn::Module {
 public:
  LinearSelfAttention(Index dim, Index heads, Index features, Rng& rng);
  /// x [N, L, dim]
  Tensor forward(const Tensor& x) const;

 private:
  Index heads_;
  nn::Linear q_, k_, v_, o_;
  Tensor features_;
};

/// Pointwise expansion, depthwise 3x3 convolution on the token grid, projection.
class LocallyEnhancedFeedForward : public nn::Module {
 public:
  LocallyEnhancedFeedForward(Index dim, Index expansion, Rng& rng);
  /// x [T, rows*cols, dim]
  Tensor forward(const Tensor& x, Index rows, Index cols) const;

 private:
  nn::Linear fc1_;
  Tensor dw_w_, dw_b_;
  nn::Linear fc2_;
};

class SpatialBlock : public nn::Module {
 public:
  SpatialBlock(const FrontendConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x, Index rows, Index cols) const;

 private:
  nn::LayerNorm norm1_;
  LinearSelfAttention attn_;
  nn::LayerNorm norm2_;
  LocallyEnhancedFeedForward leff_;
};

/// Pre-norm softmax self-attention + two-layer GELU feed-forward.
class TransformerBlock : public nn::Module {
 public:
  TransformerBlock(Index dim, Index heads, Index ff, Rng& rng);
  /// x [B, L, dim]
  Tensor forward(const Tensor& x) const;

 private:
  nn::LayerNorm norm1_;
  nn::MultiHeadAttention attn_;
  nn::LayerNorm norm2_;
  nn::Linear fc1_, fc2_;
};

class VisualFrontend : public nn::Module {
 public:
  VisualFrontend(const FrontendConfig& cfg, Rng& rng);

  const FrontendConfig& config() const { return cfg_; }

  /// video [T, H, W, 3] in [0, 1] -> token grid [T, N_s, d_token]
  Tensor tokenize(const Tensor& video) const;
  /// [T, N_s, d_token] -> [T, N_s, d_s]
  Tensor embed_tokens(const Tensor& tokens) const;
  /// Per-frame spatial transformer, [T, N_s, d_s] -> same shape.
  Tensor spatial_encode(const Tensor& grid) const;
  /// [T, N_s, d_s] -> [T, d_t]
  Tensor project(const Tensor& grid) const;
  /// [T, d_t] -> [T, d_t] with positional encoding and full attention over time.
  Tensor temporal_encode(const Tensor& x) const;
  /// Full chain: video [T, H, W, 3] -> features [T, d_t].
  Tensor encode(const Tensor& video) const;
  Tensor encode(const media::VideoClip& clip) const;

 private:
  FrontendConfig cfg_;
  Tokenizer tokenizer_;
  nn::Linear token_proj_;
  std::vector<std::unique_ptr<SpatialBlock>> spatial_;
  nn::Linear concat_proj_;
  std::vector<std::unique_ptr<TransformerBlock>> temporal_;
};

}  // namespace lipspeech
