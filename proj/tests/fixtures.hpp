// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cmath>
#include <random>

#include "lipspeech/config.hpp"
#include "lipspeech/training.hpp"

namespace lipspeech::testing {

/// Smallest configuration that exercises every component.
inline PipelineConfig micro_config() {
  PipelineConfig c = preset_config("toy");
  c.preset = "toy";
  FrontendConfig& f = c.frontend;
  f.frame_size = 8;
  f.d_token = 4;
  f.spatial_layers = 1;
  f.d_s = 4;
  f.h_s = 2;
  f.leff_expansion = 2;
  f.attention_features = 8;
  f.temporal_layers = 1;
  f.d_t = 8;
  f.h_t = 2;
  f.d_ff = 16;
  c.decoder.layers = 1;
  c.decoder.d_model = 8;
  c.decoder.heads = 2;
  c.decoder.d_ff = 16;
  c.decoder.conv_kernels = {3, 1};
  c.generator.in_dim = 8;
  c.generator.base_channels = 16;
  c.discriminator.channel_divisor = 32;
  c.augment.target_size = 8;
  c.stage1.steps = 4;
  c.stage1.stop_l1_below = 0;
  c.stage2.steps = 4;
  c.stage2.window_seconds = 0.1;
  c.stage2.stop_mel_ratio = 0;
  c.griffin_lim_iterations = 2;
  return c;
}

/// Harmonic tone with slow pitch and loudness movement.
inline media::Waveform speech_like(double seconds, int rate = 16000, double f0 = 150.0) {
  media::Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<Index>(std::llround(seconds * rate));
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 + 0.4 * f0 * std::sin(2 * M_PI * 0.7 * t);
    const double env = 0.5 + 0.5 * std::sin(2 * M_PI * 2.3 * t);
    double v = 0.0;
    for (int h = 1; h <= 8; ++h) v += std::sin(2 * M_PI * f * h * t) / h;
    w.samples.push_back(0.2 * env * v);
  }
  return w;
}

inline media::VideoClip noise_clip(Index frames, Index size, double fps, std::uint64_t seed) {
  media::VideoClip clip;
  clip.fps = fps;
  clip.source_id = "synthetic";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  for (Index t = 0; t < frames; ++t) {
    media::Image im(size, size);
    for (auto& b : im.rgb) b = static_cast<std::uint8_t>(px(rng));
    clip.frames.push_back(std::move(im));
  }
  return clip;
}

/// A clip of `seconds` at 30 fps with matching audio.
inline TrainingExample synthetic_example(const PipelineConfig& cfg, double seconds, std::uint64_t seed = 1) {
  const auto frames = static_cast<Index>(std::llround(seconds * 30.0));
  return make_example(noise_clip(frames, cfg.frontend.frame_size, 30.0, seed), speech_like(seconds), cfg);
}

}  // namespace lipspeech::testing
