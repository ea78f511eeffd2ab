// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <memory>
#include <vector>

#include "lipspeech/nn.hpp"

namespace lipspeech {

struct DecoderConfig {
  Index layers = 4;
  Index d_model = 384;
  Index heads = 8;
  Index d_ff = 1536;
  /// Kernel widths of the two convolutions in each block (odd, same padding).
  std::vector<Index> conv_kernels{9, 1};
  bool positional_encoding = true;
  Index n_mels = 80;

  void validate() const;
};

/// Pre-norm softmax self-attention followed by a convolution block over time.
class ConvTransformerBlock : public nn::Module {
 public:
  ConvTransformerBlock(const DecoderConfig& cfg, Rng& rng);
  /// x [L, d]
  Tensor forward(const Tensor& x) const;

 private:
  nn::LayerNorm norm1_;
  nn::MultiHeadAttention attn_;
  nn::LayerNorm norm2_;
  nn::Conv1d conv1_, conv2_;
};

/// Non-autoregressive acoustic decoder with the auxiliary mel head.
class AcousticDecoder : public nn::Module {
 public:
  AcousticDecoder(const DecoderConfig& cfg, Rng& rng);

  const DecoderConfig& config() const { return cfg_; }
  /// aligned [L, d] -> acoustic [L, d]
  Tensor decode(const Tensor& aligned) const;
  /// acoustic [L, d] -> mel [L, n_mels]
  Tensor aux_mel(const Tensor& acoustic) const { return mel_head_.forward(acoustic); }
  nn::Linear& mel_head() { return mel_head_; }

 private:
  DecoderConfig cfg_;
  std::vector<std::unique_ptr<ConvTransformerBlock>> blocks_;
  nn::Linear mel_head_;
};

}  // namespace lipspeech
