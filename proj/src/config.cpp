// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lipspeech/error.hpp"

namespace lipspeech {

using nlohmann::json;

Ablation parse_ablation(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "no_waveform_generator") return Ablation::no_waveform_generator;
  if (name == "no_conditional_module") return Ablation::no_conditional_module;
  if (name == "skip_stage1") return Ablation::skip_stage1;
  throw ConfigError("unknown ablation mode '" + name + "'");
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_waveform_generator: return "no_waveform_generator";
    case Ablation::no_conditional_module: return "no_conditional_module";
    case Ablation::skip_stage1: return "skip_stage1";
  }
  return "none";
}

TrainPlan TrainPlan::stage1_defaults() { return {}; }

TrainPlan TrainPlan::stage2_defaults() {
  TrainPlan p;
  p.stage = 2;
  p.optimizer = "adamw";
  p.lr = 2e-4;
  p.beta1 = 0.8;
  p.beta2 = 0.99;
  p.weight_decay = 0.01;
  p.lr_decay = 0.999;
  p.steps = 5000;
  return p;
}

Index TrainPlan::window_frames(double mel_rate) const {
  return static_cast<Index>(std::llround(window_seconds * mel_rate));
}

void TrainPlan::validate(double mel_rate) const {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  if (optimizer != "adam" && optimizer != "adamw") throw ConfigError("optimizer must be adam or adamw");
  if (lr < 0 || eps <= 0 || weight_decay < 0) throw ConfigError("optimizer coefficients out of range");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("betas must lie in [0, 1)");
  if (lr_decay <= 0 || lr_decay > 1) throw ConfigError("lr_decay must lie in (0, 1]");
  if (steps < 0 || batch_size < 1 || checkpoint_every < 0 || log_every < 0)
    throw ConfigError("step counts must be non-negative and batch_size positive");
  if (sample_seconds <= 0) throw ConfigError("sample_seconds must be positive");
  const double frames = window_seconds * mel_rate;
  if (window_seconds <= 0 || std::abs(frames - std::round(frames)) > 1e-6)
    throw ConfigError("window_seconds * mel frame rate must be a whole number of frames");
  if (stop_l1_below < 0 || stop_mel_ratio < 0 || stop_mel_ratio >= 1) throw ConfigError("early-stop thresholds out of range");
  if (stage == 1 && ablation == Ablation::skip_stage1) throw ConfigError("skip_stage1 cannot be combined with stage 1");
  if (stage == 2 && ablation == Ablation::no_waveform_generator)
    throw ConfigError("no_waveform_generator has no stage 2");
}

const TrainPlan& PipelineConfig::plan(int stage) const {
  if (stage == 1) return stage1;
  if (stage == 2) return stage2;
  throw ConfigError("stage must be 1 or 2");
}

TrainPlan& PipelineConfig::plan(int stage) {
  return const_cast<TrainPlan&>(static_cast<const PipelineConfig&>(*this).plan(stage));
}

void PipelineConfig::validate() const {
  if (version != kVersion) throw ConfigError("unsupported config version " + std::to_string(version));
  if (video_fps <= 0) throw ConfigError("video_fps must be positive");
  if (griffin_lim_iterations < 1) throw ConfigError("griffin_lim_iterations must be positive");
  frontend.validate();
  decoder.validate();
  generator.validate();
  discriminator.validate();
  if (frontend.d_t != decoder.d_model)
    throw ConfigError("frontend d_t (" + std::to_string(frontend.d_t) + ") must equal decoder d_model (" +
                      std::to_string(decoder.d_model) + ")");
  if (generator.in_dim != decoder.d_model) throw ConfigError("generator in_dim must equal decoder d_model");
  if (generator.hop() != mel.hop) throw ConfigError("generator stride product must equal the mel hop");
  if (generator.n_mels != mel.n_mels || decoder.n_mels != mel.n_mels) throw ConfigError("mel bin counts disagree");
  if (augment.target_size != frontend.frame_size) throw ConfigError("augment target_size must equal frame_size");
  if (mel.win_length > mel.n_fft || mel.hop <= 0 || mel.sample_rate <= 0) throw ConfigError("invalid STFT settings");
  if (mel.norm_max <= mel.norm_min) throw ConfigError("mel normalization range is empty");
  stage1.validate(mel.frame_rate());
  stage2.validate(mel.frame_rate());
  if (stage1.stage != 1 || stage2.stage != 2) throw ConfigError("training plans must be tagged with their stage");
}

// --- presets ------------------------------------------------------------------

PipelineConfig preset_config(const std::string& name) {
  PipelineConfig c;
  c.preset = name;
  if (name == "lip2wav") return c;
  if (name == "grid") {
    c.video_fps = 25.0;
    c.frontend.d_t = 160;
    c.frontend.d_ff = 640;
    c.decoder.d_model = 160;
    c.decoder.d_ff = 640;
    c.generator.in_dim = 160;
    return c;
  }
  if (name == "bench") {
    c.frontend.frame_size = 32;
    c.frontend.d_token = 16;
    c.frontend.spatial_layers = 2;
    c.frontend.attention_features = 64;
    c.augment.target_size = 32;
    c.generator.base_channels = 64;
    c.discriminator.channel_divisor = 8;
    return c;
  }
  if (name == "toy") {
    FrontendConfig& f = c.frontend;
    f.frame_size = 24;
    f.d_token = 8;
    f.spatial_layers = 2;
    f.d_s = 16;
    f.h_s = 2;
    f.leff_expansion = 2;
    f.attention_features = 32;
    f.temporal_layers = 2;
    f.d_t = 64;
    f.h_t = 4;
    f.d_ff = 128;
    c.decoder.layers = 2;
    c.decoder.d_model = 64;
    c.decoder.heads = 4;
    c.decoder.d_ff = 128;
    c.generator.in_dim = 64;
    c.generator.base_channels = 64;
    c.discriminator.channel_divisor = 16;
    c.augment = media::AugmentPolicy::none();
    c.augment.target_size = 24;
    c.stage1.steps = 2000;
    c.stage1.stop_l1_below = 0.05;
    c.stage2.steps = 5000;
    c.stage2.window_seconds = 0.4;
    c.stage2.stop_mel_ratio = 0.5;
    c.stage2.lr_decay = 1.0;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"lip2wav", "grid", "bench", "toy"}; }

// --- JSON binding ---------------------------------------------------------------

namespace {

class Writer {
 public:
  explicit Writer(json& j) : j_(j) {}
  template <class T>
  void operator()(const char* key, const T& v) {
    if constexpr (std::is_same_v<T, Ablation>)
      j_[key] = ablation_name(v);
    else
      j_[key] = v;
  }
  template <class F>
  void object(const char* key, F&& body) {
    json sub = json::object();
    Writer w(sub);
    body(w);
    j_[key] = std::move(sub);
  }

 private:
  json& j_;
};

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }
  template <class T>
  void operator()(const char* key, T& v) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, Ablation>)
        v = parse_ablation(it->template get<std::string>());
      else
        v = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type: " + e.what());
    }
  }
  template <class F>
  void object(const char* key, F&& body) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader r(*it, qualified(key));
    body(r);
    r.finish();
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + qualified(it.key()) + "'");
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class V, class C>
void bind_frontend(V& v, C& f) {
  v("frame_size", f.frame_size);
  v("conv_kernel", f.conv_kernel);
  v("conv_stride", f.conv_stride);
  v("conv_padding", f.conv_padding);
  v("pool", f.pool);
  v("d_token", f.d_token);
  v("spatial_layers", f.spatial_layers);
  v("d_s", f.d_s);
  v("h_s", f.h_s);
  v("leff_expansion", f.leff_expansion);
  v("attention_features", f.attention_features);
  v("temporal_layers", f.temporal_layers);
  v("d_t", f.d_t);
  v("h_t", f.h_t);
  v("d_ff", f.d_ff);
  v("shared_position_embedding", f.shared_position_embedding);
  v("max_frames", f.max_frames);
}

template <class V, class C>
void bind_decoder(V& v, C& d) {
  v("layers", d.layers);
  v("d_model", d.d_model);
  v("heads", d.heads);
  v("d_ff", d.d_ff);
  v("conv_kernels", d.conv_kernels);
  v("positional_encoding", d.positional_encoding);
  v("n_mels", d.n_mels);
}

template <class V, class C>
void bind_generator(V& v, C& g) {
  v("in_dim", g.in_dim);
  v("n_mels", g.n_mels);
  v("upsample_kernels", g.upsample_kernels);
  v("upsample_strides", g.upsample_strides);
  v("resblock_kernels", g.resblock_kernels);
  v("resblock_dilations", g.resblock_dilations);
  v("base_channels", g.base_channels);
}

template <class V, class C>
void bind_discriminator(V& v, C& d) {
  v("periods", d.periods);
  v("scales", d.scales);
  v("channel_divisor", d.channel_divisor);
}

template <class V, class C>
void bind_mel(V& v, C& m) {
  v("sample_rate", m.sample_rate);
  v("n_fft", m.n_fft);
  v("win_length", m.win_length);
  v("hop", m.hop);
  v("n_mels", m.n_mels);
  v("fmin", m.fmin);
  v("fmax", m.fmax);
  v("log_floor", m.log_floor);
  v("norm_min", m.norm_min);
  v("norm_max", m.norm_max);
}

template <class V, class C>
void bind_augment(V& v, C& a) {
  v("flip_probability", a.flip_probability);
  v("crop_probability", a.crop_probability);
  v("max_crop_fraction", a.max_crop_fraction);
  v("target_size", a.target_size);
}

template <class V, class C>
void bind_plan(V& v, C& p) {
  v("stage", p.stage);
  v("optimizer", p.optimizer);
  v("lr", p.lr);
  v("beta1", p.beta1);
  v("beta2", p.beta2);
  v("eps", p.eps);
  v("weight_decay", p.weight_decay);
  v("lr_decay", p.lr_decay);
  v("window_seconds", p.window_seconds);
  v("sample_seconds", p.sample_seconds);
  v("freeze_upstream", p.freeze_upstream);
  v("copy_projection", p.copy_projection);
  v("ablation", p.ablation);
  v("seed", p.seed);
  v("steps", p.steps);
  v("batch_size", p.batch_size);
  v("checkpoint_every", p.checkpoint_every);
  v("log_every", p.log_every);
  v("stop_l1_below", p.stop_l1_below);
  v("stop_mel_ratio", p.stop_mel_ratio);
  v("init_checkpoint", p.init_checkpoint);
}

template <class V, class C>
void bind_pipeline(V& v, C& c) {
  v("version", c.version);
  v("preset", c.preset);
  v("video_fps", c.video_fps);
  v("griffin_lim_iterations", c.griffin_lim_iterations);
  v.object("frontend", [&](auto& s) { bind_frontend(s, c.frontend); });
  v.object("decoder", [&](auto& s) { bind_decoder(s, c.decoder); });
  v.object("generator", [&](auto& s) { bind_generator(s, c.generator); });
  v.object("discriminator", [&](auto& s) { bind_discriminator(s, c.discriminator); });
  v.object("mel", [&](auto& s) { bind_mel(s, c.mel); });
  v.object("augment", [&](auto& s) { bind_augment(s, c.augment); });
  v.object("stage1_weights", [&](auto& s) {
    s("ssim", c.stage1_weights.ssim);
    s("l1", c.stage1_weights.l1);
  });
  v.object("stage2_weights", [&](auto& s) {
    s("adversarial", c.stage2_weights.adversarial);
    s("mel", c.stage2_weights.mel);
    s("feature_matching", c.stage2_weights.feature_matching);
  });
  v.object("stage1", [&](auto& s) { bind_plan(s, c.stage1); });
  v.object("stage2", [&](auto& s) { bind_plan(s, c.stage2); });
  v.object("data", [&](auto& s) {
    s("train", c.data.train);
    s("validation", c.data.validation);
    s("output_dir", c.data.output_dir);
  });
}

}  // namespace

std::string to_json(const PipelineConfig& cfg, int indent) {
  json j = json::object();
  Writer w(j);
  bind_pipeline(w, cfg);
  return j.dump(indent);
}

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "lip2wav";
  if (auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("config key 'preset' must be a string");
    preset = it->get<std::string>();
  }
  PipelineConfig cfg = preset_config(preset);
  Reader r(j, "");
  bind_pipeline(r, cfg);
  r.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path_or_preset) {
  const std::filesystem::path path(path_or_preset);
  if (!std::filesystem::exists(path)) {
    for (const auto& name : preset_names())
      if (name == path_or_preset) return preset_config(name);
    throw ConfigError("config file not found: " + path_or_preset);
  }
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace lipspeech
