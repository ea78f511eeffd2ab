// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Synthesis, latency benchmarking against a frame-by-frame autoregressive
// reference, and parameter accounting.

#include <string>
#include <utility>
#include <vector>

#include "lipspeech/model.hpp"

namespace lipspeech {

/// Samples produced for a clip of `frames` frames at fps.
Index expected_samples(Index frames, double fps, const PipelineConfig& cfg);

/// Sequential stand-in decoder: every mel frame depends on the previous
/// frame and a recurrent state, so it runs one step per frame. A step is a
/// causal version of one conditional-module layer: a recurrent mixing
/// projection, a width-`kernel` convolution over past states into d_ff, and
/// the projection back.
class AutoregressiveReference : public nn::Module {
 public:
  AutoregressiveReference(Index d_model, Index d_ff, Index kernel, Index n_mels, std::uint64_t seed);
  /// Sized like one layer of the model's conditional module.
  static AutoregressiveReference for_model(const PipelineConfig& cfg, std::uint64_t seed);
  /// aligned [L, d_model] -> mel [L, n_mels]; *steps receives the loop count.
  Tensor decode(const Tensor& aligned, Index* steps = nullptr) const;

 private:
  Index d_, ff_, kernel_, mels_;
  Tensor w_mix_, b_mix_, w_conv_, b_conv_, w_back_, b_back_, w_out_, b_out_;
};

struct LatencyRow {
  double input_seconds = 0;
  std::string stage;    // "mel" or "waveform"
  std::string decoder;  // "parallel" or "autoregressive"
  double mean_ms = 0;
  double std_ms = 0;
  Index trials = 0;
  bool failed = false;
  std::string error;
};

struct LatencyReport {
  std::vector<LatencyRow> rows;
  std::string hardware;
  Index batch_size = 1;

  /// input_seconds,stage,decoder,mean_ms,std_ms,trials
  std::string csv() const;
  /// Aligned plain-text table with speedups per length.
  std::string table() const;
  const LatencyRow* find(double seconds, const std::string& stage, const std::string& decoder) const;
  /// autoregressive mean / parallel mean for a stage and length.
  double speedup(double seconds, const std::string& stage) const;
  /// Least-squares slope of mean_ms against input_seconds.
  double slope(const std::string& stage, const std::string& decoder) const;
};

struct BenchmarkOptions {
  std::vector<double> lengths{1, 2, 3, 5, 8};
  Index trials = 10;
  Index warmup = 3;
  bool mel_stage = true;
  bool waveform_stage = true;
  std::uint64_t seed = 7;
};

/// Times the mel path (frontend, alignment, decoder, aux head) and the full
/// waveform path for the parallel model and the autoregressive reference on
/// random clips of each length. Timing covers the forward call only.
LatencyReport run_benchmark(const SpeechModel& model, const AutoregressiveReference& reference,
                            const BenchmarkOptions& opts);

struct ParamReport {
  std::vector<std::pair<std::string, Index>> modules;
  Index total = 0;

  std::string table() const;
};

/// Groups trainable parameters by their two leading name components.
ParamReport count_params(const nn::Module& module);
ParamReport count_params(const nn::NamedTensors& tensors);

}  // namespace lipspeech
