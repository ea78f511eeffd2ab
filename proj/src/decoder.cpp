// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/decoder.hpp"

#include <string>

#include "lipspeech/error.hpp"

namespace lipspeech {

void DecoderConfig::validate() const {
  if (layers < 0 || d_model <= 0 || d_ff <= 0 || n_mels <= 0) throw ConfigError("decoder: dimensions must be positive");
  if (heads <= 0 || d_model % heads != 0) throw ConfigError("decoder: d_model must be divisible by heads");
  if (conv_kernels.size() != 2) throw ConfigError("decoder: conv block needs exactly two kernel widths");
  for (Index k : conv_kernels)
    if (k <= 0 || k % 2 == 0) throw ConfigError("decoder: conv kernel widths must be odd");
}

namespace {

nn::Conv1dOptions same(Index k) {
  nn::Conv1dOptions o;
  o.padding = k / 2;
  return o;
}

// [L, d] <-> [1, d, L]
Tensor to_channels(const Tensor& x) { return ops::reshape(ops::transpose(x, 0, 1), {1, x.dim(1), x.dim(0)}); }
Tensor from_channels(const Tensor& x) { return ops::transpose(ops::reshape(x, {x.dim(1), x.dim(2)}), 0, 1); }

}  // namespace

ConvTransformerBlock::ConvTransformerBlock(const DecoderConfig& cfg, Rng& rng)
    : norm1_(cfg.d_model), attn_(cfg.d_model, cfg.heads, rng), norm2_(cfg.d_model),
      conv1_(cfg.d_model, cfg.d_ff, cfg.conv_kernels[0], same(cfg.conv_kernels[0]), rng),
      conv2_(cfg.d_ff, cfg.d_model, cfg.conv_kernels[1], same(cfg.conv_kernels[1]), rng) {
  add_child("norm1", norm1_);
  add_child("attn", attn_);
  add_child("norm2", norm2_);
  add_child("conv1", conv1_);
  add_child("conv2", conv2_);
}

Tensor ConvTransformerBlock::forward(const Tensor& x) const {
  const Index len = x.dim(0), d = x.dim(1);
  Tensor h = ops::add(x, ops::reshape(attn_.forward(ops::reshape(norm1_.forward(x), {1, len, d})), {len, d}));
  Tensor c = conv2_.forward(ops::gelu(conv1_.forward(to_channels(norm2_.forward(h)))));
  return ops::add(h, from_channels(c));
}

AcousticDecoder::AcousticDecoder(const DecoderConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)), mel_head_(cfg.d_model, cfg.n_mels, true, rng) {
  for (Index i = 0; i < cfg.layers; ++i) {
    blocks_.push_back(std::make_unique<ConvTransformerBlock>(cfg, rng));
    add_child("blocks." + std::to_string(i), *blocks_.back());
  }
  add_child("mel_head", mel_head_);
}

Tensor AcousticDecoder::decode(const Tensor& aligned) const {
  if (aligned.rank() != 2 || aligned.dim(1) != cfg_.d_model)
    throw ConfigError("decoder expects [L, " + std::to_string(cfg_.d_model) + "] features, got " + shape_str(aligned.shape()));
  Tensor x = aligned;
  if (cfg_.positional_encoding) x = ops::add(x, nn::sinusoidal_encoding(x.dim(0), cfg_.d_model));
  for (const auto& block : blocks_) x = block->forward(x);
  return x;
}

}  // namespace lipspeech
