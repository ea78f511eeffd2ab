// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Full pipeline configuration with strict JSON (de)serialization.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lipspeech/decoder.hpp"
#include "lipspeech/frontend.hpp"
#include "lipspeech/losses.hpp"
#include "lipspeech/media_io.hpp"
#include "lipspeech/vocoder.hpp"

namespace lipspeech {

enum class Ablation { none, no_waveform_generator, no_conditional_module, skip_stage1 };

Ablation parse_ablation(const std::string& name);
std::string ablation_name(Ablation a);

struct TrainPlan {
  int stage = 1;
  std::string optimizer = "adam";  // "adam" or "adamw"
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  /// Multiplied into the learning rate after every epoch.
  double lr_decay = 1.0;
  double window_seconds = 1.2;
  double sample_seconds = 3.0;
  bool freeze_upstream = true;
  /// Initializes the generator projection from the auxiliary mel head.
  bool copy_projection = false;
  Ablation ablation = Ablation::none;
  std::uint64_t seed = 1234;
  Index steps = 2000;
  Index batch_size = 1;
  Index checkpoint_every = 1000;
  Index log_every = 100;
  /// Stage 1: stop once the L1 component falls below this (0 disables).
  double stop_l1_below = 0.0;
  /// Stage 2: stop once the mel moving average falls to this fraction of its
  /// step-100 value (0 disables).
  double stop_mel_ratio = 0.0;
  /// Stage 2 only: the stage-1 checkpoint to start from.
  std::string init_checkpoint;

  static TrainPlan stage1_defaults();
  static TrainPlan stage2_defaults();
  Index window_frames(double mel_rate) const;
  void validate(double mel_rate) const;
};

struct DataConfig {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::string output_dir = "runs";
};

struct PipelineConfig {
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::string preset = "lip2wav";
  double video_fps = 30.0;
  /// Phase-refinement iterations on the no_waveform_generator path.
  int griffin_lim_iterations = 32;
  FrontendConfig frontend;
  DecoderConfig decoder;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  media::MelConfig mel;
  media::AugmentPolicy augment;
  losses::Stage1Weights stage1_weights;
  losses::Stage2Weights stage2_weights;
  TrainPlan stage1 = TrainPlan::stage1_defaults();
  TrainPlan stage2 = TrainPlan::stage2_defaults();
  DataConfig data;

  const TrainPlan& plan(int stage) const;
  TrainPlan& plan(int stage);
  /// Cross-module consistency (widths, hop, frame size).
  void validate() const;
};

/// Named presets: "lip2wav" (full), "grid", "bench" and "toy".
PipelineConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

std::string to_json(const PipelineConfig& cfg, int indent = 2);
/// Starts from the preset named by the "preset" key (default lip2wav) and
/// applies every other key on top. Unknown keys are ConfigErrors.
PipelineConfig parse_config(const std::string& json_text);
/// A file path, or a bare preset name.
PipelineConfig load_config(const std::string& path_or_preset);

}  // namespace lipspeech
