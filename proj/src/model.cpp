// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/model.hpp"

#include "lipspeech/error.hpp"

namespace lipspeech {

SpeechModel::SpeechModel(const PipelineConfig& cfg, Ablation ablation, std::uint64_t seed)
    : cfg_(cfg), ablation_(ablation), rng_(seed), frontend_(cfg.frontend, rng_) {
  cfg_.validate();
  add_child("frontend", frontend_);
  if (ablation_ != Ablation::no_conditional_module) {
    decoder_ = std::make_unique<AcousticDecoder>(cfg_.decoder, rng_);
    add_child("decoder", *decoder_);
  } else {
    direct_head_ = std::make_unique<nn::Linear>(cfg_.frontend.d_t, cfg_.mel.n_mels, true, rng_);
    add_child("mel_head", *direct_head_);
  }
  if (ablation_ != Ablation::no_waveform_generator) {
    generator_ = std::make_unique<Generator>(cfg_.generator, rng_);
    add_child("generator", *generator_);
  }
}

DuplicationPlan SpeechModel::alignment_plan(Index frames, double fps) const {
  return duplication_counts(frames, fps, cfg_.mel.frame_rate());
}

Tensor SpeechModel::acoustic(const Tensor& video, double fps) const {
  Tensor visual = frontend_.encode(video);
  Tensor aligned = align(visual, alignment_plan(visual.dim(0), fps));
  return decoder_ ? decoder_->decode(aligned) : aligned;
}

Tensor SpeechModel::aux_mel(const Tensor& acoustic) const {
  return decoder_ ? decoder_->aux_mel(acoustic) : direct_head_->forward(acoustic);
}

Tensor SpeechModel::waveform(const Tensor& acoustic) const {
  if (!generator_) throw ConfigError("this model variant has no waveform generator");
  return generator_->generate(acoustic);
}

Tensor SpeechModel::prepare_clip(const media::VideoClip& clip) const {
  clip.validate();
  const Index size = cfg_.frontend.frame_size;
  if (clip.frames.front().height == size && clip.frames.front().width == size) return clip_to_tensor(clip);
  std::vector<media::CropBox> boxes;
  for (const auto& f : clip.frames) boxes.push_back(media::full_frame_box(f));
  return clip_to_tensor(media::load_clip(clip.frames, boxes, size, clip.fps, clip.source_id));
}

media::Waveform SpeechModel::synthesize(const media::VideoClip& clip) const {
  NoGradGuard no_grad;
  Tensor acoustic_features = acoustic(prepare_clip(clip), clip.fps);
  if (generator_) {
    media::Waveform w;
    w.sample_rate = cfg_.mel.sample_rate;
    w.samples = waveform(acoustic_features).values();
    return w;
  }
  Tensor mel = aux_mel(acoustic_features);
  for (double& v : mel.data()) v = std::clamp(v, 0.0, 1.0);
  return media::griffin_lim(media::MelSpectrogram::from_tensor(mel, cfg_.mel), cfg_.griffin_lim_iterations, cfg_.mel);
}

nn::NamedTensors SpeechModel::upstream_parameters() const {
  nn::NamedTensors out;
  for (auto& [name, t] : named_parameters())
    if (name.rfind("generator.", 0) != 0) out.emplace_back(name, t);
  return out;
}

nn::NamedTensors SpeechModel::generator_parameters() const {
  nn::NamedTensors out;
  for (auto& [name, t] : named_parameters())
    if (name.rfind("generator.", 0) == 0) out.emplace_back(name, t);
  return out;
}

void SpeechModel::copy_projection_from_aux() {
  if (!generator_) throw ConfigError("copy_projection needs a waveform generator");
  nn::Linear& head = decoder_ ? decoder_->mel_head() : *direct_head_;
  nn::Linear& proj = generator_->projection();
  if (head.weight().shape() != proj.weight().shape()) throw ConfigError("aux head and projection shapes differ");
  proj.weight().values() = head.weight().values();
  proj.bias().values() = head.bias().values();
}

}  // namespace lipspeech
