// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// The assembled lip-to-speech model: visual frontend, duplication alignment,
// acoustic decoder with its auxiliary mel head, and the waveform generator.
// Ablation modes drop components from the graph.

#include <memory>

#include "lipspeech/alignment.hpp"
#include "lipspeech/config.hpp"
#include "lipspeech/decoder.hpp"
#include "lipspeech/frontend.hpp"
#include "lipspeech/vocoder.hpp"

namespace lipspeech {

class SpeechModel : public nn::Module {
 public:
  SpeechModel(const PipelineConfig& cfg, Ablation ablation, std::uint64_t seed);

  const PipelineConfig& config() const { return cfg_; }
  Ablation ablation() const { return ablation_; }
  bool has_decoder() const { return decoder_ != nullptr; }
  bool has_generator() const { return generator_ != nullptr; }

  VisualFrontend& frontend() { return frontend_; }
  const VisualFrontend& frontend() const { return frontend_; }
  AcousticDecoder* decoder() { return decoder_.get(); }
  Generator* generator() { return generator_.get(); }
  const Generator* generator() const { return generator_.get(); }

  /// Mel-rate expansion of T frames at fps.
  DuplicationPlan alignment_plan(Index frames, double fps) const;
  /// video [T, H, W, 3] -> acoustic features [ceil(T d), d_model]
  Tensor acoustic(const Tensor& video, double fps) const;
  /// [L, d_model] -> normalized mel [L, n_mels]
  Tensor aux_mel(const Tensor& acoustic) const;
  /// [L, d_model] -> [L * hop]; requires a generator.
  Tensor waveform(const Tensor& acoustic) const;

  /// One parallel pass. Without a generator the aux mel is inverted with
  /// Griffin-Lim.
  media::Waveform synthesize(const media::VideoClip& clip) const;
  /// The clip resized to the configured frame size, as a tensor.
  Tensor prepare_clip(const media::VideoClip& clip) const;

  /// Frontend, conditional module and auxiliary head.
  nn::NamedTensors upstream_parameters() const;
  nn::NamedTensors generator_parameters() const;
  /// Initializes the generator projection from the auxiliary mel head.
  void copy_projection_from_aux();

 private:
  PipelineConfig cfg_;
  Ablation ablation_;
  Rng rng_;
  VisualFrontend frontend_;
  std::unique_ptr<AcousticDecoder> decoder_;
  std::unique_ptr<nn::Linear> direct_head_;
  std::unique_ptr<Generator> generator_;
};

}  // namespace lipspeech
