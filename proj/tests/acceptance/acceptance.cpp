// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// Runs the end-to-end acceptance checks and prints one PASS/FAIL line per
// check. Arguments select a subset by number; the exit status is nonzero
// when any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../fixtures.hpp"
#include "../test_util.hpp"
#include "lipspeech/alignment.hpp"
#include "lipspeech/error.hpp"
#include "lipspeech/frontend.hpp"
#include "lipspeech/inference.hpp"
#include "lipspeech/losses.hpp"
#include "lipspeech/model.hpp"
#include "lipspeech/training.hpp"
#include "lipspeech/vocoder.hpp"

namespace {

using namespace lipspeech;
using lipspeech::testing::gradient_check;
using lipspeech::testing::joint_gradient_check;
using lipspeech::testing::micro_config;
using lipspeech::testing::noise_clip;
using lipspeech::testing::random_tensor;
using lipspeech::testing::synthetic_example;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome shape_chain() {
  const PipelineConfig cfg = preset_config("lip2wav");
  SpeechModel model(cfg, Ablation::none, 1);
  const Index d_t = cfg.frontend.d_t;
  NoGradGuard no_grad;
  bool ok = true;
  std::ostringstream detail;
  for (int seconds : {1, 2, 3, 5, 8}) {
    const Index frames = 30 * seconds;
    const Tensor video = clip_to_tensor(noise_clip(frames, 96, 30.0, static_cast<std::uint64_t>(seconds)));
    const Tensor visual = model.frontend().encode(video);
    const Tensor aligned = align(visual, model.alignment_plan(frames, 30.0));
    const Tensor acoustic = model.decoder()->decode(aligned);
    const Tensor mel = model.aux_mel(acoustic);
    const Tensor wave = model.waveform(acoustic);
    const Index mel_frames = 80 * seconds;
    ok = ok && visual.shape() == Shape{frames, d_t} && aligned.shape() == Shape{mel_frames, d_t} &&
         mel.shape() == Shape{mel_frames, 80} && wave.shape() == Shape{200 * mel_frames};
    detail << seconds << "s: " << visual.dim(0) << "x" << visual.dim(1) << " -> " << aligned.dim(0) << "x"
           << aligned.dim(1) << " -> " << mel.dim(0) << "x" << mel.dim(1) << " -> " << wave.dim(0) << "; ";
  }
  return {ok, detail.str()};
}

// --- 2 ---------------------------------------------------------------------

Outcome alignment_oracle() {
  const DuplicationPlan nine = duplication_counts(9, 30.0, 80.0);
  const bool pattern = nine.counts == std::vector<Index>{3, 3, 2, 3, 3, 2, 3, 3, 2} && nine.total == 24;

  bool constant = true;
  for (auto [frames, fps, rate] : {std::tuple{10, 40.0, 80.0}, {7, 20.0, 80.0}, {13, 25.0, 75.0}}) {
    const DuplicationPlan p = duplication_counts(frames, fps, rate);
    const auto d = static_cast<Index>(rate / fps);
    constant = constant && p.total == frames * d &&
               std::all_of(p.counts.begin(), p.counts.end(), [&](Index c) { return c == d; });
  }

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> fps_dist(5.0, 60.0), ratio(1.0, 12.0);
  std::uniform_int_distribution<Index> frames_dist(1, 500);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double fps = fps_dist(rng), rate = fps * ratio(rng);
    const Index frames = frames_dist(rng);
    const DuplicationPlan p = duplication_counts(frames, fps, rate);
    const double exact = static_cast<double>(frames) * rate / fps;
    const Index sum = std::accumulate(p.counts.begin(), p.counts.end(), Index{0});
    const bool sum_law = sum == p.total && static_cast<Index>(p.counts.size()) == frames &&
                         static_cast<double>(sum) >= exact - 1e-6 && static_cast<double>(sum) < exact + 1.0;
    const bool positive = std::all_of(p.counts.begin(), p.counts.end(), [](Index c) { return c > 0; });
    if (!sum_law || !positive) ++bad;
  }
  return {pattern && constant && bad == 0,
          fmt("T=9 pattern %s, integer-d constant %s, %d/1000 random triples violate the sum law",
              pattern ? "ok" : "wrong", constant ? "ok" : "wrong", bad)};
}

// --- 3 ---------------------------------------------------------------------

Outcome loss_identities() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor x({40, 80});
  for (double& v : x.data()) v = u(rng);
  const double ssim = losses::ssim_loss(x, x).item();
  const double l1 = losses::l1_loss(x, x).item();

  auto filled = [](double v) { return std::vector<Tensor>{Tensor({3, 5}, v), Tensor({11}, v), Tensor({2, 2}, v)}; };
  const losses::AdversarialLoss adv = losses::adversarial_losses(filled(1.0), filled(0.0));

  const std::vector<Tensor> real{Tensor({4}, 1.0), Tensor({2}, -0.3)};
  const std::vector<Tensor> fake{Tensor({4}, 1.1), Tensor({2}, 0.1)};
  const double fm = losses::feature_matching_loss(real, fake).item();

  const bool ok = std::abs(ssim) < 1e-9 && std::abs(l1) < 1e-9 && std::abs(adv.discriminator.item()) < 1e-9 &&
                  std::abs(adv.generator.item() - 1.0) < 1e-9 && std::abs(fm - 0.5) < 1e-9;
  return {ok, fmt("ssim %.3g, l1 %.3g, L_D %.3g, L_G %.12g, two-layer FM %.12g", ssim, l1,
                  adv.discriminator.item(), adv.generator.item(), fm)};
}

// --- 4 ---------------------------------------------------------------------

Outcome gradient_checks() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);

  Tensor p({12, 10}), t({12, 10});
  for (double& v : p.data()) v = u(rng);
  for (double& v : t.data()) v = u(rng);
  p.set_requires_grad(true);
  const double e_ssim = gradient_check([&] { return losses::ssim_loss(p, t); }, {p});

  std::vector<Tensor> real{random_tensor({6}, rng, 1.0, true), random_tensor({2, 3}, rng, 1.0, true)};
  std::vector<Tensor> fake{random_tensor({6}, rng, 1.0, true), random_tensor({2, 3}, rng, 1.0, true)};
  const double e_fm = gradient_check([&] { return losses::feature_matching_loss(real, fake); },
                                     {real[0], real[1], fake[0], fake[1]});

  const PipelineConfig cfg = micro_config();
  SpeechModel model(cfg, Ablation::none, 4);
  Tensor video = clip_to_tensor(noise_clip(4, 8, 30.0, 4));
  video.set_requires_grad(true);
  const Index mel_frames = model.alignment_plan(4, 30.0).total;
  Tensor target({mel_frames, cfg.mel.n_mels});
  for (double& v : target.data()) v = u(rng);
  std::vector<Tensor> inputs{video};
  for (auto& [name, param] : model.upstream_parameters()) inputs.push_back(param);
  const auto e_model = joint_gradient_check(
      [&] { return losses::stage1_loss(model.aux_mel(model.acoustic(video, 30.0)), target, cfg.stage1_weights).total; },
      inputs);

  const bool ok = e_ssim < 1e-4 && e_fm < 1e-4 && e_model.relative < 1e-4;
  return {ok, fmt("relative error ssim %.2e, feature matching %.2e, stage-1 forward %.2e over %zu tensors "
                  "(worst entry %.1e)",
                  e_ssim, e_fm, e_model.relative, inputs.size(), e_model.max_absolute)};
}

// --- 5 ---------------------------------------------------------------------

std::vector<double> softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v, Index n, Index d) {
  std::vector<double> out(static_cast<std::size_t>(n * d), 0.0);
  const auto& qv = q.values();
  const auto& kv = k.values();
  const auto& vv = v.values();
  for (Index i = 0; i < n; ++i) {
    std::vector<double> s(static_cast<std::size_t>(n));
    double mx = -1e300;
    for (Index j = 0; j < n; ++j) {
      double dot = 0;
      for (Index c = 0; c < d; ++c) dot += qv[i * d + c] * kv[j * d + c];
      s[j] = dot / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (double& e : s) z += (e = std::exp(e - mx));
    for (Index j = 0; j < n; ++j)
      for (Index c = 0; c < d; ++c) out[i * d + c] += s[j] / z * vv[j * d + c];
  }
  return out;
}

double mean_attention_error(Index m) {
  const Index n = 16, d = 8;
  double total = 0;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(5000 + static_cast<std::uint64_t>(s));
    const Tensor q = random_tensor({1, n, d}, rng), k = random_tensor({1, n, d}, rng), v = random_tensor({1, n, d}, rng);
    const Tensor approx = linear_attention(q, k, v, m, static_cast<std::uint64_t>(s));
    const std::vector<double> exact = softmax_attention(q, k, v, n, d);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      num += (approx.values()[i] - exact[i]) * (approx.values()[i] - exact[i]);
      den += exact[i] * exact[i];
    }
    total += std::sqrt(num / den);
  }
  return total / 100.0;
}

Outcome linear_attention_fidelity() {
  const double e16 = mean_attention_error(16), e256 = mean_attention_error(256), e1024 = mean_attention_error(1024);
  return {e256 < 0.15 && e1024 < e16,
          fmt("mean relative error m=16 %.4f, m=256 %.4f (target < 0.15), m=1024 %.4f", e16, e256, e1024)};
}

// --- 6 ---------------------------------------------------------------------

/// First step whose trailing 100-step mean is at most half the mean of
/// steps 1..100, or -1.
Index halving_step(const std::vector<double>& mel, double* baseline, double* best) {
  constexpr std::size_t kWindow = 100;
  *baseline = 0;
  *best = 0;
  if (mel.size() < kWindow) return -1;
  double sum = std::accumulate(mel.begin(), mel.begin() + kWindow, 0.0);
  *baseline = sum / kWindow;
  *best = *baseline;
  for (std::size_t i = kWindow; i < mel.size(); ++i) {
    sum += mel[i] - mel[i - kWindow];
    *best = std::min(*best, sum / kWindow);
    if (sum / kWindow <= 0.5 * *baseline) return static_cast<Index>(i + 1);
  }
  return -1;
}

Outcome overfit_smoke() {
  const PipelineConfig cfg = preset_config("toy");
  const std::vector<TrainingExample> data{synthetic_example(cfg, 3.0, 6)};
  auto model = apply_ablation(cfg, Ablation::none, 6);

  PipelineConfig s1 = cfg;
  s1.stage1.steps = 2000;
  s1.stage1.stop_l1_below = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r1 = train_stage1(*model, data, s1);
  const auto t1 = std::chrono::steady_clock::now();
  const std::vector<double> l1 = r1.series("l1");
  const double l1_min = *std::min_element(l1.begin(), l1.end());
  const bool stage1 = l1_min < 0.05;

  PipelineConfig s2 = cfg;
  s2.stage2.steps = 5000;
  s2.stage2.stop_mel_ratio = 0.5;
  Rng disc_rng(66);
  Discriminators disc(cfg.discriminator, disc_rng);
  const TrainResult r2 = train_stage2(*model, disc, data, s2);
  const auto t2 = std::chrono::steady_clock::now();
  double baseline = 0, best = 0;
  const Index halved_at = halving_step(r2.series("mel"), &baseline, &best);
  const bool stage2 = halved_at > 0;

  const double secs1 = std::chrono::duration<double>(t1 - t0).count();
  const double secs2 = std::chrono::duration<double>(t2 - t1).count();
  return {stage1 && stage2,
          fmt("stage 1: best L1 %.4f after %zu steps (target < 0.05; per-bin %.5f), %.0fs; "
              "stage 2: step-100 mel average %.4f, best %.4f, %s, %.0fs",
              l1_min, l1.size(), l1_min / cfg.mel.n_mels, secs1, baseline, best,
              stage2 ? fmt("halved at step %lld", static_cast<long long>(halved_at)).c_str() : "not halved in 5000 steps",
              secs2)};
}

// --- 7 ---------------------------------------------------------------------

Outcome freeze_contract() {
  PipelineConfig cfg = micro_config();
  const std::vector<TrainingExample> data{synthetic_example(cfg, 0.5, 7)};
  cfg.stage2.steps = 100;

  auto frozen = apply_ablation(cfg, Ablation::none, 7);
  Rng r1(70);
  Discriminators d1(cfg.discriminator, r1);
  const auto before = tensor_hash(frozen->upstream_parameters());
  const auto gen_before = tensor_hash(frozen->generator_parameters());
  train_stage2(*frozen, d1, data, cfg);
  const bool kept = tensor_hash(frozen->upstream_parameters()) == before;
  const bool gen_moved = tensor_hash(frozen->generator_parameters()) != gen_before;

  cfg.stage2.freeze_upstream = false;
  auto open = apply_ablation(cfg, Ablation::none, 7);
  Rng r2(70);
  Discriminators d2(cfg.discriminator, r2);
  train_stage2(*open, d2, data, cfg);
  const bool moved = tensor_hash(open->upstream_parameters()) != before;

  return {kept && moved && gen_moved, fmt("frozen upstream hash %s, generator %s; unfrozen upstream hash %s",
                                          kept ? "unchanged" : "CHANGED", gen_moved ? "updated" : "unchanged",
                                          moved ? "changed" : "UNCHANGED")};
}

// --- 8 ---------------------------------------------------------------------

Outcome vocoder_length_law() {
  const PipelineConfig cfg = preset_config("lip2wav");
  const GeneratorConfig& g = cfg.generator;
  const Index product =
      std::accumulate(g.upsample_strides.begin(), g.upsample_strides.end(), Index{1}, std::multiplies<>());
  Rng init(8);
  Generator gen(g, init);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<Index> rows(1, 48);
  int bad = 0;
  NoGradGuard no_grad;
  for (int i = 0; i < 20; ++i) {
    const Index n = rows(rng);
    if (gen.generate(random_tensor({n, g.in_dim}, rng)).numel() != 200 * n) ++bad;
  }
  const bool ok = product == 200 && g.hop() == 200 && cfg.mel.hop == 200 && bad == 0;
  return {ok, fmt("stride product %lld, hop %lld, %d/20 random lengths off", static_cast<long long>(product),
                  static_cast<long long>(cfg.mel.hop), bad)};
}

// --- 9 ---------------------------------------------------------------------

Outcome window_correspondence() {
  const Index frames = 240, hop = 200, window = 96;
  Tensor acoustic({frames, 4});
  for (Index r = 0; r < frames; ++r)
    for (Index c = 0; c < 4; ++c) acoustic.data()[r * 4 + c] = static_cast<double>(r);
  Tensor audio({frames * hop});
  for (Index i = 0; i < frames * hop; ++i) audio.data()[i] = static_cast<double>(i);

  Rng rng(9);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SampledWindow w = sample_window(acoustic, audio, window, hop, rng);
    bool ok = !w.fell_back && w.frames == window && w.sample_start == w.start * hop &&
              w.audio.numel() == window * hop;
    for (Index j = 0; ok && j < window; ++j) {
      const auto mel_index = static_cast<Index>(w.acoustic.values()[j * 4]);
      for (Index s = 0; s < hop; ++s)
        ok = ok && static_cast<Index>(w.audio.values()[j * hop + s]) == mel_index * hop + s;
    }
    if (!ok) ++bad;
  }
  return {bad == 0, fmt("%d/100 random windows misaligned", bad)};
}

// --- 10 --------------------------------------------------------------------

Outcome latency_trend() {
  const PipelineConfig cfg = preset_config("bench");
  SpeechModel model(cfg, Ablation::none, 10);
  const AutoregressiveReference reference = AutoregressiveReference::for_model(cfg, 10);
  BenchmarkOptions opts;
  opts.trials = 5;
  opts.waveform_stage = false;
  const LatencyReport report = run_benchmark(model, reference, opts);
  std::cout << report.table();
  const double s1 = report.speedup(1, "mel"), s3 = report.speedup(3, "mel");
  const double par = report.slope("mel", "parallel"), ar = report.slope("mel", "autoregressive");
  return {s3 > s1 && par < ar,
          fmt("speedup 1s %.3fx, 3s %.3fx; slope parallel %.1f ms/s, autoregressive %.1f ms/s", s1, s3, par, ar)};
}

// --- 11 --------------------------------------------------------------------

Outcome parameter_counter() {
  Rng rng(11);
  nn::Linear lin(3, 2, true, rng);
  const bool linear = count_params(lin).total == 8;

  const PipelineConfig micro = micro_config();
  SpeechModel small(micro, Ablation::none, 11);
  const ParamReport r = count_params(small);
  const Index d = micro.decoder.d_model, ff = micro.decoder.d_ff;
  const Index k1 = micro.decoder.conv_kernels[0], k2 = micro.decoder.conv_kernels[1];
  const Index block = 2 * (2 * d) + 4 * (d * d + d) + (d * k1 * ff + ff) + (ff * k2 * d + d);
  const Index mel_head = d * micro.mel.n_mels + micro.mel.n_mels;
  Index blocks = -1, head = -1, sum = 0;
  for (const auto& [name, n] : r.modules) {
    sum += n;
    if (name == "decoder.blocks") blocks = n;
    if (name == "decoder.mel_head") head = n;
  }
  const bool hand = blocks == micro.decoder.layers * block && head == mel_head && sum == r.total;

  const SpeechModel full(preset_config("lip2wav"), Ablation::none, 11);
  const ParamReport fr = count_params(full);
  std::cout << fr.table();
  const double reference = 50.09e6;
  const double deviation = (static_cast<double>(fr.total) - reference) / reference * 100.0;
  return {linear && hand, fmt("Linear(3,2) %s, hand count %s; full default config %.2fM parameters vs 50.09M "
                              "reference (%+.1f%%, informational)",
                              linear ? "8" : "wrong", hand ? "exact" : "mismatch",
                              static_cast<double>(fr.total) / 1e6, deviation)};
}

// --- 12 --------------------------------------------------------------------

Outcome ablation_paths() {
  PipelineConfig cfg = micro_config();
  cfg.stage1.steps = 1;
  cfg.stage2.steps = 1;
  const std::vector<TrainingExample> data{synthetic_example(cfg, 0.5, 12)};
  const media::VideoClip clip = noise_clip(30, 8, 30.0, 12);
  const Index expected = expected_samples(30, 30.0, cfg);
  bool ok = true;
  std::ostringstream detail;
  for (Ablation mode : {Ablation::no_waveform_generator, Ablation::no_conditional_module, Ablation::skip_stage1}) {
    auto model = apply_ablation(cfg, mode, 12);
    Rng disc_rng(120);
    Discriminators disc(cfg.discriminator, disc_rng);
    Index steps = 0;
    if (mode != Ablation::skip_stage1) steps += train_stage1(*model, data, cfg).last_step;
    if (mode != Ablation::no_waveform_generator) steps += train_stage2(*model, disc, data, cfg).last_step;
    const media::Waveform audio = model->synthesize(clip);
    const bool finite = std::all_of(audio.samples.begin(), audio.samples.end(), [](double v) { return std::isfinite(v); });
    const bool good = audio.size() == expected && finite && steps >= 1;
    ok = ok && good;
    detail << ablation_name(mode) << ": " << steps << " step(s), " << audio.size() << " samples"
           << (model->has_generator() ? "" : " via Griffin-Lim") << (good ? "" : " WRONG") << "; ";
  }
  detail << "expected " << expected;
  return {ok, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks{
      {1, "shape chain", shape_chain},
      {2, "alignment oracle", alignment_oracle},
      {3, "loss identities", loss_identities},
      {4, "gradient checks", gradient_checks},
      {5, "linear attention fidelity", linear_attention_fidelity},
      {6, "overfit smoke test", overfit_smoke},
      {7, "freeze contract", freeze_contract},
      {8, "vocoder length law", vocoder_length_law},
      {9, "sampling window correspondence", window_correspondence},
      {10, "latency trend", latency_trend},
      {11, "parameter counter", parameter_counter},
      {12, "ablation paths", ablation_paths},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long id = std::strtol(argv[i], &end, 10);
    if (*end != '\0' || id < 1 || id > static_cast<long>(checks.size())) {
      std::cerr << "usage: " << argv[0] << " [criterion number ...]\n";
      return 2;
    }
    selected.insert(static_cast<int>(id));
  }

  int failures = 0;
  for (const Check& c : checks) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << " (" << fmt("%.1fs", secs)
              << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
