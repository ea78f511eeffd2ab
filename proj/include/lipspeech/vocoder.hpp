// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Waveform generator (projection to mel width, transposed-convolution
// upsampling with multi-receptive-field residual blocks) and the
// multi-period / multi-scale discriminators used for adversarial training.

#include <memory>
#include <utility>
#include <vector>

#include "lipspeech/nn.hpp"

namespace lipspeech {

struct GeneratorConfig {
  Index in_dim = 384;
  Index n_mels = 80;
  std::vector<Index> upsample_kernels{9, 9, 8, 4};
  std::vector<Index> upsample_strides{5, 5, 4, 2};
  std::vector<Index> resblock_kernels{3, 7, 11};
  std::vector<std::vector<Index>> resblock_dilations{{1, 3, 5}, {1, 3, 5}, {1, 3, 5}};
  Index base_channels = 512;

  Index hop() const;
  void validate() const;
};

/// Two dilated convolutions per dilation, each with a residual connection.
class ResBlock : public nn::Module {
 public:
  ResBlock(Index channels, Index kernel, const std::vector<Index>& dilations, Rng& rng);
  Tensor forward(const Tensor& x) const;
  /// One-sided receptive field growth in samples.
  Index radius() const { return radius_; }

 private:
  std::vector<std::unique_ptr<nn::Conv1d>> dilated_, plain_;
  Index radius_ = 0;
};

class Generator : public nn::Module {
 public:
  Generator(const GeneratorConfig& cfg, Rng& rng);

  const GeneratorConfig& config() const { return cfg_; }
  /// acoustic [L, in_dim] -> waveform [L * hop] in [-1, 1]
  Tensor generate(const Tensor& acoustic) const;
  /// projected mel-width features [L, n_mels] -> waveform [L * hop]
  Tensor synthesize(const Tensor& mel) const;
  nn::Linear& projection() { return projection_; }

  /// Output samples [first, last] (unclipped) that can depend on input frame i.
  std::pair<Index, Index> influence(Index frame) const;

 private:
  GeneratorConfig cfg_;
  nn::Linear projection_;
  nn::Conv1d conv_pre_;
  std::vector<std::unique_ptr<nn::ConvTranspose1d>> ups_;
  std::vector<std::vector<std::unique_ptr<ResBlock>>> resblocks_;
  nn::Conv1d conv_post_;
};

struct DiscriminatorConfig {
  std::vector<Index> periods{2, 3, 5, 7, 11};
  Index scales = 3;
  /// Divides every hidden channel count (1 = full width).
  Index channel_divisor = 1;

  Index min_length() const;
  void validate() const;
};

struct DiscriminatorOutput {
  /// One score map per sub-discriminator, flattened.
  std::vector<Tensor> scores;
  /// Intermediate activations, [sub-discriminator][layer].
  std::vector<std::vector<Tensor>> features;
  /// Length of the signal each sub-discriminator consumed (after padding or pooling).
  std::vector<Index> input_lengths;
};

/// Stack of 1-D convolutions with leaky ReLU, the last producing scores.
class ConvStack : public nn::Module {
 public:
  struct Layer {
    Index in, out, kernel, stride, groups;
  };
  ConvStack(const std::vector<Layer>& layers, Rng& rng);
  /// x [B, 1, L]; appends every layer output to features and returns the score map.
  Tensor forward(const Tensor& x, std::vector<Tensor>& features) const;
  Index layer_count() const { return static_cast<Index>(convs_.size()); }

 private:
  std::vector<std::unique_ptr<nn::Conv1d>> convs_;
};

class PeriodDiscriminator : public nn::Module {
 public:
  PeriodDiscriminator(Index period, Index divisor, Rng& rng);
  Index period() const { return period_; }
  /// wave [L]; reflect-pads on the right to a multiple of the period.
  Tensor forward(const Tensor& wave, std::vector<Tensor>& features, Index* padded_length) const;

 private:
  Index period_;
  ConvStack stack_;
};

class ScaleDiscriminator : public nn::Module {
 public:
  ScaleDiscriminator(Index divisor, Rng& rng);
  /// x [1, 1, L]
  Tensor forward(const Tensor& x, std::vector<Tensor>& features) const { return stack_.forward(x, features); }

 private:
  ConvStack stack_;
};

class Discriminators : public nn::Module {
 public:
  Discriminators(const DiscriminatorConfig& cfg, Rng& rng);
  const DiscriminatorConfig& config() const { return cfg_; }
  Index count() const { return static_cast<Index>(periods_.size() + scales_.size()); }
  /// wave [L]; throws InputError below min_length().
  DiscriminatorOutput discriminate(const Tensor& wave) const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<std::unique_ptr<PeriodDiscriminator>> periods_;
  std::vector<std::unique_ptr<ScaleDiscriminator>> scales_;
};

}  // namespace lipspeech
