// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <vector>

#include "lipspeech/media_io.hpp"
#include "lipspeech/tensor.hpp"
#include "lipspeech/vocoder.hpp"

namespace lipspeech::losses {

struct Stage1Weights {
  double ssim = 1.0;
  double l1 = 1.0;
};

struct Stage2Weights {
  double adversarial = 1.0;
  double mel = 45.0;
  double feature_matching = 2.0;
};

/// Per-frame structural similarity of [F, B] matrices using global frame
/// statistics; returns [F].
Tensor ssim_frames(const Tensor& pred, const Tensor& target, double dynamic_range = 1.0);
/// mean over frames of 1 - SSIM.
Tensor ssim_loss(const Tensor& pred, const Tensor& target);
/// mean over frames of the frame-wise L1 norm.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

struct Stage1Loss {
  Tensor total, ssim, l1;
};
Stage1Loss stage1_loss(const Tensor& pred, const Tensor& target, const Stage1Weights& w = {});

struct AdversarialLoss {
  Tensor discriminator, generator;
};
/// Least-squares GAN losses averaged over sub-discriminators and score elements.
AdversarialLoss adversarial_losses(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores);

/// Differentiable raw log-mel of a waveform [L] -> [frames, n_mels], matching
/// media::log_mel.
Tensor log_mel(const Tensor& wave, const media::MelConfig& cfg);
/// Mean absolute difference between raw log-mels of two equal-length waveforms.
Tensor mel_loss(const Tensor& generated, const Tensor& reference, const media::MelConfig& cfg);

/// Sum over layers of mean |real - fake|.
Tensor feature_matching_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake);
/// Averaged over sub-discriminators.
Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real,
                             const std::vector<std::vector<Tensor>>& fake);

struct Stage2Loss {
  Tensor generator_total;
  Tensor adversarial_g, mel, feature_matching;
  /// Adversarial term only.
  Tensor discriminator_total;
};

/// real and fake hold discriminator outputs on the reference and generated
/// audio. The discriminator total reads only the scores.
Stage2Loss stage2_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, const Tensor& generated,
                         const Tensor& reference, const media::MelConfig& cfg, const Stage2Weights& w = {});

}  // namespace lipspeech::losses
