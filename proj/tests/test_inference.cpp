// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "doctest.h"
#include "lipspeech/error.hpp"
#include "lipspeech/inference.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace lipspeech;
using lipspeech::testing::micro_config;
using lipspeech::testing::noise_clip;

TEST_CASE("output length law") {
  PipelineConfig cfg;
  CHECK(expected_samples(90, 30.0, cfg) == 48000);
  CHECK(expected_samples(30, 30.0, cfg) == 16000);
  CHECK(expected_samples(25, 25.0, cfg) == 16000);
  CHECK(expected_samples(9, 30.0, cfg) == 24 * 200);
}

TEST_CASE("synthesis is one deterministic pass of the predicted length") {
  PipelineConfig cfg = micro_config();
  SpeechModel model(cfg, Ablation::none, 4);
  for (double seconds : {1.0, 3.0}) {
    const auto frames = static_cast<Index>(seconds * 30);
    media::VideoClip clip = noise_clip(frames, 96, 30.0, 5);
    media::Waveform a = model.synthesize(clip);
    media::Waveform b = model.synthesize(clip);
    CHECK(a.size() == static_cast<Index>(seconds * 16000));
    CHECK(a.size() == expected_samples(frames, 30.0, cfg));
    CHECK(a.sample_rate == 16000);
    CHECK(a.samples == b.samples);
  }
}

TEST_CASE("autoregressive reference is sequential and causal") {
  AutoregressiveReference ar(16, 32, 3, 80, 3);
  std::mt19937_64 rng(4);
  Tensor x = lipspeech::testing::random_tensor({240, 16}, rng);
  Index steps = 0;
  Tensor y = ar.decode(x, &steps);
  CHECK(steps == 240);
  CHECK(y.shape() == Shape{240, 80});

  Tensor x2 = x.detach();
  const Index j = 100;
  x2.values()[static_cast<std::size_t>(j * 16)] += 1.0;
  Tensor y2 = ar.decode(x2);
  for (Index t = 0; t < 240; ++t) {
    double diff = 0.0;
    for (Index c = 0; c < 80; ++c) diff = std::max(diff, std::abs(y.values()[t * 80 + c] - y2.values()[t * 80 + c]));
    if (t < j)
      CHECK(diff == 0.0);
    else
      CHECK(diff > 0.0);
  }
  CHECK_THROWS_AS(ar.decode(Tensor({4, 8})), InputError);
}

TEST_CASE("benchmark report shape") {
  PipelineConfig cfg = micro_config();
  SpeechModel model(cfg, Ablation::none, 1);
  AutoregressiveReference ar = AutoregressiveReference::for_model(cfg, 2);
  BenchmarkOptions opts;
  opts.lengths = {1, 2, 3};
  opts.trials = 5;
  opts.warmup = 1;
  LatencyReport r = run_benchmark(model, ar, opts);
  CHECK(r.rows.size() == 12);
  for (const auto& row : r.rows) {
    CHECK_FALSE(row.failed);
    CHECK(row.trials == 5);
    CHECK(row.mean_ms > 0);
    CHECK(row.std_ms >= 0);
  }
  const std::string csv = r.csv();
  CHECK(csv.rfind("input_seconds,stage,decoder,mean_ms,std_ms,trials\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK(std::isfinite(r.speedup(2, "mel")));
  CHECK_FALSE(r.table().empty());

  opts.trials = 4;
  CHECK_THROWS_AS(run_benchmark(model, ar, opts), ConfigError);
  opts.trials = 5;
  opts.lengths = {2, 1};
  CHECK_THROWS_AS(run_benchmark(model, ar, opts), ConfigError);
}

TEST_CASE("latency slope is an ordinary least-squares fit") {
  LatencyReport r;
  for (double s : {1.0, 2.0, 3.0, 5.0}) {
    r.rows.push_back({s, "mel", "parallel", 10 + 2 * s, 0, 5, false, {}});
    r.rows.push_back({s, "mel", "autoregressive", 5 + 7 * s, 0, 5, false, {}});
  }
  CHECK(r.slope("mel", "parallel") == doctest::Approx(2.0));
  CHECK(r.slope("mel", "autoregressive") == doctest::Approx(7.0));
  CHECK(r.speedup(1.0, "mel") == doctest::Approx(12.0 / 12.0));
  CHECK(r.speedup(5.0, "mel") == doctest::Approx(40.0 / 20.0));
}

TEST_CASE("parameter counts") {
  Rng rng(1);
  nn::Linear lin(3, 2, true, rng);
  ParamReport one = count_params(lin);
  CHECK(one.total == 8);

  PipelineConfig cfg = micro_config();
  SpeechModel model(cfg, Ablation::none, 1);
  ParamReport r = count_params(model);
  Index sum = 0;
  for (const auto& [name, n] : r.modules) sum += n;
  CHECK(sum == r.total);
  CHECK(r.total == model.parameter_count());
  CHECK(count_params(model).table() == r.table());

  // Hand count of the micro decoder block: two layer norms, attention, two convolutions.
  const Index d = 8, ff = 16;
  const Index block = 2 * (2 * d) + 4 * (d * d + d) + (d * 3 * ff + ff) + (ff * 1 * d + d);
  Index decoder_blocks = 0;
  for (const auto& [name, n] : r.modules)
    if (name == "decoder.blocks") decoder_blocks = n;
  CHECK(decoder_blocks == block);
}
