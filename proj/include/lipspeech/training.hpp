// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Two-stage training: stage 1 fits the visual frontend and conditional module
// to mel targets; stage 2 trains the waveform generator adversarially on
// sampled windows, optionally with the upstream modules frozen.

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lipspeech/checkpoint.hpp"
#include "lipspeech/config.hpp"
#include "lipspeech/model.hpp"

namespace lipspeech {

struct TrainingExample {
  media::VideoClip clip;
  /// Cached clip tensor [T, H, W, 3] at the model frame size.
  Tensor video;
  /// Normalized mel [frames, n_mels].
  Tensor mel;
  /// Audio samples [L].
  Tensor audio;
  std::string id;
};

/// Builds one example; the clip is resized to cfg.frontend.frame_size.
TrainingExample make_example(const media::VideoClip& clip, const media::Waveform& audio, const PipelineConfig& cfg);
/// Reads preprocessed directories and cuts them into sample_seconds windows.
std::vector<TrainingExample> load_examples(std::span<const std::string> dirs, const PipelineConfig& cfg,
                                           const TrainPlan& plan, std::vector<std::string>* warnings);

/// Adam with optional decoupled weight decay.
class Adam {
 public:
  Adam(nn::NamedTensors params, const TrainPlan& plan);

  void zero_grad();
  void step();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  Index steps() const { return t_; }

  void save(Archive& archive, const std::string& prefix) const;
  void load(const Archive& archive, const std::string& prefix);

 private:
  nn::NamedTensors params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  Index t_ = 0;
};

struct LossRecord {
  Index step;
  std::string component;
  double value;
};

/// In-memory loss history mirrored to an append-only CSV when a path is set.
class LossLog {
 public:
  explicit LossLog(const std::filesystem::path& csv = {});
  void add(Index step, const std::string& component, double value);
  const std::vector<LossRecord>& records() const { return records_; }
  std::vector<double> series(const std::string& component) const;

 private:
  std::vector<LossRecord> records_;
  std::unique_ptr<std::ofstream> out_;
};

struct SampledWindow {
  Index start = 0;
  Index frames = 0;
  Index sample_start = 0;
  Tensor acoustic;  // [frames, d]
  Tensor audio;     // [frames * hop]
  bool fell_back = false;
};

/// Acoustic rows [start, start + frames) and audio [start * hop, (start + frames) * hop).
SampledWindow window_at(const Tensor& acoustic, const Tensor& audio, Index start, Index frames, Index hop);
/// Uniform random start. Inputs shorter than the window fall back to the full
/// usable length with fell_back set.
SampledWindow sample_window(const Tensor& acoustic, const Tensor& audio, Index frames, Index hop, Rng& rng);

struct TrainOptions {
  /// Checkpoints and loss CSVs go here; empty keeps everything in memory.
  std::filesystem::path output_dir;
  std::span<const TrainingExample> validation;
  /// Continue from this archive (parameters, optimizer state, step).
  std::string resume;
  bool verbose = false;
  /// Called after every optimization step.
  std::function<void(Index step)> on_step;
};

struct TrainResult {
  Index first_step = 0;
  Index last_step = 0;
  bool stopped_early = false;
  std::vector<LossRecord> losses;
  std::vector<std::string> notes;
  std::filesystem::path final_checkpoint;

  std::vector<double> series(const std::string& component) const;
};

/// Stage-specific validation plus the ablation compatibility rules. Returns
/// the effective plan (skip_stage1 trains everything end to end).
TrainPlan effective_plan(const PipelineConfig& cfg, int stage, Ablation ablation);

/// Builds the model variant for an ablation mode.
std::unique_ptr<SpeechModel> apply_ablation(const PipelineConfig& cfg, Ablation mode, std::uint64_t seed);

TrainResult train_stage1(SpeechModel& model, std::span<const TrainingExample> data, const PipelineConfig& cfg,
                         const TrainOptions& opts = {});
TrainResult train_stage2(SpeechModel& model, Discriminators& disc, std::span<const TrainingExample> data,
                         const PipelineConfig& cfg, const TrainOptions& opts = {});

/// Model and discriminator parameters plus buffers under "model." and "disc.".
Archive model_archive(const SpeechModel& model, const Discriminators* disc, Index step, int stage);
/// Loads "model." entries. Throws ConfigError listing mismatched names.
void load_model(SpeechModel& model, const Archive& archive);
/// Rebuilds a model from an archive's embedded config and loads it.
std::unique_ptr<SpeechModel> model_from_archive(const Archive& archive);

/// CLI entry: loads data from cfg.data, a stage-1 checkpoint for stage 2,
/// and trains.
TrainResult run_training(PipelineConfig cfg, int stage, Ablation ablation, const std::string& resume);

}  // namespace lipspeech
