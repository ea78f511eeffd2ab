// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/inference.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "lipspeech/error.hpp"
#include "lipspeech/kernels.hpp"

namespace lipspeech {

Index expected_samples(Index frames, double fps, const PipelineConfig& cfg) {
  return duplication_counts(frames, fps, cfg.mel.frame_rate()).total * cfg.mel.hop;
}

// --- autoregressive reference --------------------------------------------------------

AutoregressiveReference::AutoregressiveReference(Index d_model, Index d_ff, Index kernel, Index n_mels,
                                                 std::uint64_t seed)
    : d_(d_model), ff_(d_ff), kernel_(kernel), mels_(n_mels) {
  if (kernel < 1) throw ConfigError("autoregressive reference kernel must be positive");
  Rng rng(seed);
  auto init = [&](Index in, Index out) { return nn::uniform({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng); };
  const Index mix_in = 2 * d_ + mels_;
  w_mix_ = add_parameter("mix.weight", init(mix_in, d_));
  b_mix_ = add_parameter("mix.bias", Tensor({d_}));
  w_conv_ = add_parameter("conv.weight", init(kernel_ * d_, ff_));
  b_conv_ = add_parameter("conv.bias", Tensor({ff_}));
  w_back_ = add_parameter("back.weight", init(ff_, d_));
  b_back_ = add_parameter("back.bias", Tensor({d_}));
  w_out_ = add_parameter("out.weight", init(d_, mels_));
  b_out_ = add_parameter("out.bias", Tensor({mels_}));
}

AutoregressiveReference AutoregressiveReference::for_model(const PipelineConfig& cfg, std::uint64_t seed) {
  return AutoregressiveReference(cfg.decoder.d_model, cfg.decoder.d_ff, cfg.decoder.conv_kernels.front(),
                                 cfg.mel.n_mels, seed);
}

Tensor AutoregressiveReference::decode(const Tensor& aligned, Index* steps) const {
  if (aligned.rank() != 2 || aligned.dim(1) != d_) throw InputError("autoregressive reference expects [L, d_model]");
  const Index len = aligned.dim(0);
  const Index mix_in = 2 * d_ + mels_;
  auto gemv = [](Index in, Index out, const double* x, const Tensor& w, const Tensor& b, double* y) {
    std::copy(b.values().begin(), b.values().end(), y);
    kernels::gemm({1, out, in, false, false}, 1.0, x, w.values().data(), 1.0, y);
  };
  std::vector<double> z(static_cast<std::size_t>(mix_in), 0.0), mixed(static_cast<std::size_t>(d_)),
      hidden(static_cast<std::size_t>(ff_)), back(static_cast<std::size_t>(d_));
  // Ring of the last `kernel` mixed states, oldest first once unrolled.
  std::vector<double> history(static_cast<std::size_t>(kernel_ * d_), 0.0), window(history.size());
  std::vector<double> state(static_cast<std::size_t>(d_), 0.0);
  Tensor out({len, mels_});
  const double* x = aligned.values().data();
  Index count = 0;
  for (Index t = 0; t < len; ++t, ++count) {
    std::copy(x + t * d_, x + (t + 1) * d_, z.begin());
    std::copy(state.begin(), state.end(), z.begin() + d_);
    if (t > 0) std::copy(out.values().begin() + (t - 1) * mels_, out.values().begin() + t * mels_, z.begin() + 2 * d_);
    gemv(mix_in, d_, z.data(), w_mix_, b_mix_, mixed.data());
    for (Index i = 0; i < d_; ++i) mixed[static_cast<std::size_t>(i)] = x[t * d_ + i] + std::tanh(mixed[static_cast<std::size_t>(i)]);

    const Index slot = t % kernel_;
    std::copy(mixed.begin(), mixed.end(), history.begin() + slot * d_);
    for (Index k = 0; k < kernel_; ++k) {
      const Index src = (slot + 1 + k) % kernel_;
      std::copy(history.begin() + src * d_, history.begin() + (src + 1) * d_, window.begin() + k * d_);
    }
    gemv(kernel_ * d_, ff_, window.data(), w_conv_, b_conv_, hidden.data());
    for (double& v : hidden) v = v * 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    gemv(ff_, d_, hidden.data(), w_back_, b_back_, back.data());
    for (Index i = 0; i < d_; ++i)
      state[static_cast<std::size_t>(i)] = mixed[static_cast<std::size_t>(i)] + back[static_cast<std::size_t>(i)];

    gemv(d_, mels_, state.data(), w_out_, b_out_, out.values().data() + t * mels_);
  }
  if (steps) *steps = count;
  return out;
}

// --- report -----------------------------------------------------------------------------

std::string LatencyReport::csv() const {
  std::ostringstream os;
  os << "input_seconds,stage,decoder,mean_ms,std_ms,trials\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.input_seconds << ',' << r.stage << ',' << r.decoder << ',';
    if (r.failed)
      os << "failed,failed," << r.trials << '\n';
    else
      os << r.mean_ms << ',' << r.std_ms << ',' << r.trials << '\n';
  }
  return os.str();
}

const LatencyRow* LatencyReport::find(double seconds, const std::string& stage, const std::string& decoder) const {
  for (const auto& r : rows)
    if (r.input_seconds == seconds && r.stage == stage && r.decoder == decoder && !r.failed) return &r;
  return nullptr;
}

double LatencyReport::speedup(double seconds, const std::string& stage) const {
  const LatencyRow* p = find(seconds, stage, "parallel");
  const LatencyRow* a = find(seconds, stage, "autoregressive");
  if (!p || !a || p->mean_ms <= 0) return NAN;
  return a->mean_ms / p->mean_ms;
}

double LatencyReport::slope(const std::string& stage, const std::string& decoder) const {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    if (r.failed || r.stage != stage || r.decoder != decoder) continue;
    n += 1;
    sx += r.input_seconds;
    sy += r.mean_ms;
    sxx += r.input_seconds * r.input_seconds;
    sxy += r.input_seconds * r.mean_ms;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0) return NAN;
  return (n * sxy - sx * sy) / den;
}

std::string LatencyReport::table() const {
  std::ostringstream os;
  os << "hardware: " << hardware << ", batch size " << batch_size << "\n";
  os << std::left << std::setw(8) << "seconds" << std::setw(10) << "stage" << std::setw(16) << "decoder"
     << std::right << std::setw(12) << "mean_ms" << std::setw(10) << "std_ms" << std::setw(10) << "speedup\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(8) << r.input_seconds << std::setw(10) << r.stage << std::setw(16) << r.decoder
       << std::right;
    if (r.failed) {
      os << "  failed: " << r.error << "\n";
      continue;
    }
    os << std::setw(12) << r.mean_ms << std::setw(10) << r.std_ms;
    if (r.decoder == "autoregressive") os << std::setw(9) << speedup(r.input_seconds, r.stage) << "x";
    os << "\n";
  }
  return os.str();
}

// --- benchmark -------------------------------------------------------------------------

namespace {

std::string hardware_string() {
  std::ifstream in("/proc/cpuinfo");
  std::string line, model = "unknown cpu";
  while (std::getline(in, line))
    if (line.rfind("model name", 0) == 0) {
      model = line.substr(line.find(':') + 2);
      break;
    }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

template <class F>
LatencyRow time_call(double seconds, const char* stage, const char* decoder, const BenchmarkOptions& opts, F&& fn) {
  LatencyRow row;
  row.input_seconds = seconds;
  row.stage = stage;
  row.decoder = decoder;
  row.trials = opts.trials;
  try {
    for (Index i = 0; i < opts.warmup; ++i) fn();
    std::vector<double> ms;
    for (Index i = 0; i < opts.trials; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      const auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double mean = 0, var = 0;
    for (double v : ms) mean += v;
    mean /= static_cast<double>(ms.size());
    for (double v : ms) var += (v - mean) * (v - mean);
    row.mean_ms = mean;
    row.std_ms = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
  } catch (const std::bad_alloc&) {
    row.failed = true;
    row.error = "out of memory";
  }
  return row;
}

}  // namespace

LatencyReport run_benchmark(const SpeechModel& model, const AutoregressiveReference& reference,
                            const BenchmarkOptions& opts) {
  if (opts.trials < 5) throw ConfigError("benchmark needs at least 5 trials");
  for (std::size_t i = 1; i < opts.lengths.size(); ++i)
    if (opts.lengths[i] <= opts.lengths[i - 1]) throw ConfigError("benchmark lengths must be strictly ascending");
  if (model.has_decoder() == false) throw ConfigError("benchmark needs the conditional module");

  const PipelineConfig& cfg = model.config();
  LatencyReport report;
  report.hardware = hardware_string();
  NoGradGuard no_grad;
  Rng rng(opts.seed);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  const Index size = cfg.frontend.frame_size;

  for (double seconds : opts.lengths) {
    const Index frames = std::max<Index>(1, static_cast<Index>(std::llround(seconds * cfg.video_fps)));
    Tensor video({frames, size, size, 3});
    for (double& v : video.data()) v = pixel(rng);
    const double fps = cfg.video_fps;
    auto aligned_features = [&] {
      Tensor visual = model.frontend().encode(video);
      return align(visual, model.alignment_plan(frames, fps));
    };
    auto parallel_mel = [&] { return model.aux_mel(model.acoustic(video, fps)); };
    auto sequential_mel = [&] { return reference.decode(aligned_features()); };

    if (opts.mel_stage) {
      report.rows.push_back(time_call(seconds, "mel", "parallel", opts, parallel_mel));
      report.rows.push_back(time_call(seconds, "mel", "autoregressive", opts, sequential_mel));
    }
    if (opts.waveform_stage && model.has_generator()) {
      report.rows.push_back(
          time_call(seconds, "waveform", "parallel", opts, [&] { return model.waveform(model.acoustic(video, fps)); }));
      report.rows.push_back(time_call(seconds, "waveform", "autoregressive", opts,
                                      [&] { return model.generator()->synthesize(sequential_mel()); }));
    }
  }
  return report;
}

// --- parameter counts -------------------------------------------------------------------

ParamReport count_params(const nn::NamedTensors& tensors) {
  ParamReport r;
  std::map<std::string, std::size_t> slot;
  for (const auto& [name, t] : tensors) {
    std::string key = name;
    const auto first = name.find('.');
    if (first != std::string::npos) {
      const auto second = name.find('.', first + 1);
      key = second == std::string::npos ? name.substr(0, first) : name.substr(0, second);
    }
    auto [it, inserted] = slot.emplace(key, r.modules.size());
    if (inserted) r.modules.emplace_back(key, 0);
    r.modules[it->second].second += t.numel();
    r.total += t.numel();
  }
  return r;
}

ParamReport count_params(const nn::Module& module) { return count_params(module.named_parameters()); }

std::string ParamReport::table() const {
  std::ostringstream os;
  for (const auto& [name, n] : modules) os << std::left << std::setw(32) << name << std::right << std::setw(12) << n << "\n";
  os << std::left << std::setw(32) << "total" << std::right << std::setw(12) << total << "\n";
  return os.str();
}

}  // namespace lipspeech
