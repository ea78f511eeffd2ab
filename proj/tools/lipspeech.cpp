// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// lipspeech: preprocessing, training, synthesis, benchmarking and parameter
// counting from the command line.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "lipspeech/checkpoint.hpp"
#include "lipspeech/config.hpp"
#include "lipspeech/error.hpp"
#include "lipspeech/inference.hpp"
#include "lipspeech/media_io.hpp"
#include "lipspeech/model.hpp"
#include "lipspeech/training.hpp"

namespace fs = std::filesystem;
using namespace lipspeech;

namespace {

struct PreprocessArgs {
  std::string video, audio, boxes, out, config = "lip2wav";
  double fps = 0;
};

int preprocess(const PreprocessArgs& a) {
  const PipelineConfig cfg = load_config(a.config);
  double fps = a.fps > 0 ? a.fps : cfg.video_fps;
  std::vector<media::Image> frames;
  if (fs::is_directory(a.video)) {
    media::VideoClip raw = media::read_clip_directory(a.video, fps);
    frames = std::move(raw.frames);
    if (a.fps <= 0) fps = raw.fps;
  } else {
    double probed = 0;
    frames = media::decode_video(a.video, &probed);
    if (a.fps <= 0 && probed > 0) fps = probed;
  }
  if (frames.empty()) throw InputError("no frames in " + a.video);

  std::vector<media::CropBox> boxes;
  if (!a.boxes.empty()) {
    boxes = media::read_crop_boxes(a.boxes);
  } else {
    for (const auto& f : frames) boxes.push_back(media::full_frame_box(f));
  }
  media::VideoClip clip = media::load_clip(frames, boxes, cfg.frontend.frame_size, fps, fs::path(a.video).stem());

  media::Waveform audio = media::read_wav(a.audio, cfg.mel.sample_rate);
  media::normalize_peak(audio);

  // Video and audio must cover the same time span to within one video frame.
  const double rate = audio.sample_rate;
  const auto expected = static_cast<Index>(std::llround(clip.frame_count() * rate / fps));
  const double off_frames = std::abs(static_cast<double>(audio.size() - expected)) * fps / rate;
  if (off_frames > 1.0)
    std::cerr << "warning: audio is " << audio.duration() << " s but video is " << clip.duration()
              << " s; trimming to the shorter\n";
  if (audio.size() > expected) {
    audio.samples.resize(static_cast<std::size_t>(expected));
  } else if (off_frames <= 1.0) {
    audio.samples.resize(static_cast<std::size_t>(expected), 0.0);
  } else {
    const auto keep = static_cast<Index>(std::floor(static_cast<double>(audio.size()) * fps / rate));
    clip.frames.resize(static_cast<std::size_t>(keep));
    audio.samples.resize(static_cast<std::size_t>(std::llround(keep * rate / fps)));
  }
  if (clip.frames.empty()) throw InputError("audio too short for a single video frame");

  const fs::path out(a.out);
  fs::create_directories(out);
  media::write_frame_directory(out / "frames", clip);
  media::write_wav(out / "audio.wav", audio);
  const media::MelSpectrogram mel = media::extract_mel(audio, cfg.mel);
  nlohmann::json meta{{"source", clip.source_id},  {"frames", clip.frame_count()}, {"fps", fps},
                      {"samples", audio.size()},   {"sample_rate", audio.sample_rate},
                      {"mel_frames", mel.frames},  {"frame_size", cfg.frontend.frame_size}};
  std::ofstream(out / "meta.json") << meta.dump(2) << "\n";
  std::cout << "wrote " << clip.frame_count() << " frames, " << audio.size() << " samples, " << mel.frames
            << " mel frames to " << out << "\n";
  return 0;
}

struct TrainArgs {
  int stage = 1;
  std::string config, resume, ablation = "none";
};

int train(const TrainArgs& a) {
  const TrainResult r = run_training(load_config(a.config), a.stage, parse_ablation(a.ablation), a.resume);
  for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
  std::cout << "stage " << a.stage << " finished at step " << r.last_step << (r.stopped_early ? " (early stop)" : "")
            << "\n";
  if (!r.final_checkpoint.empty()) std::cout << "checkpoint " << r.final_checkpoint.string() << "\n";
  return 0;
}

struct SynthesizeArgs {
  std::string input, checkpoint, out;
};

int synthesize(const SynthesizeArgs& a) {
  const auto model = model_from_archive(load_archive(a.checkpoint));
  const fs::path in(a.input);
  const fs::path frames = fs::is_directory(in / "frames") ? in / "frames" : in;
  const media::VideoClip clip = media::read_clip_directory(frames, model->config().video_fps);
  const media::Waveform audio = model->synthesize(clip);
  media::write_wav(a.out, audio);
  std::cout << "wrote " << audio.size() << " samples (" << audio.duration() << " s) to " << a.out << "\n";
  return 0;
}

struct BenchmarkArgs {
  std::vector<double> lengths{1, 2, 3, 5, 8};
  int trials = 10, warmup = 3;
  std::string checkpoint, config = "bench", out, stage = "both";
};

int benchmark(const BenchmarkArgs& a) {
  std::unique_ptr<SpeechModel> model;
  if (!a.checkpoint.empty()) {
    model = model_from_archive(load_archive(a.checkpoint));
  } else {
    model = std::make_unique<SpeechModel>(load_config(a.config), Ablation::none, 1);
  }
  const AutoregressiveReference reference = AutoregressiveReference::for_model(model->config(), 2);
  BenchmarkOptions opts;
  opts.lengths = a.lengths;
  opts.trials = a.trials;
  opts.warmup = a.warmup;
  opts.mel_stage = a.stage != "waveform";
  opts.waveform_stage = a.stage != "mel";
  const LatencyReport report = run_benchmark(*model, reference, opts);
  std::cout << report.table();
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw InputError("cannot write " + a.out);
    f << report.csv();
  }
  for (const auto& row : report.rows)
    if (row.failed) return 1;
  return 0;
}

struct CountArgs {
  std::string config, checkpoint, ablation = "none";
};

int count(const CountArgs& a) {
  ParamReport report;
  if (!a.checkpoint.empty()) {
    report = count_params(*model_from_archive(load_archive(a.checkpoint)));
  } else {
    const SpeechModel model(load_config(a.config), parse_ablation(a.ablation), 1);
    report = count_params(model);
  }
  std::cout << report.table();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lip-to-speech synthesis: preprocessing, training, synthesis and benchmarks"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Crop, resize and align a video with its audio track");
  p->add_option("--video", pre.video, "Video file (decoded with ffmpeg) or directory of PPM frames")->required();
  p->add_option("--audio", pre.audio, "WAV file")->required()->check(CLI::ExistingFile);
  p->add_option("--boxes", pre.boxes, "Crop boxes, one 'frame x0 y0 x1 y1' line per frame")->check(CLI::ExistingFile);
  p->add_option("--out", pre.out, "Output directory")->required();
  p->add_option("--config", pre.config, "Config file or preset name")->capture_default_str();
  p->add_option("--fps", pre.fps, "Override the video frame rate");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run training stage 1 or 2");
  t->add_option("--stage", tr.stage, "Training stage")->required()->check(CLI::IsMember({1, 2}));
  t->add_option("--config", tr.config, "Config file or preset name")->required();
  t->add_option("--resume", tr.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  t->add_option("--ablation", tr.ablation, "none, no_waveform_generator, no_conditional_module or skip_stage1")
      ->capture_default_str();

  SynthesizeArgs sy;
  auto* s = app.add_subcommand("synthesize", "Generate speech for a preprocessed clip");
  s->add_option("--input", sy.input, "Preprocessed directory or frame directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--checkpoint", sy.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sy.out, "Output WAV file")->required();

  BenchmarkArgs be;
  auto* b = app.add_subcommand("benchmark", "Time the parallel model against the autoregressive reference");
  b->add_option("--lengths", be.lengths, "Input lengths in seconds, ascending")->delimiter(',')->capture_default_str();
  b->add_option("--trials", be.trials, "Timed trials per point")->capture_default_str();
  b->add_option("--warmup", be.warmup, "Discarded runs per point")->capture_default_str();
  b->add_option("--checkpoint", be.checkpoint, "Model checkpoint (default: untrained model from --config)")
      ->check(CLI::ExistingFile);
  b->add_option("--config", be.config, "Config used without a checkpoint")->capture_default_str();
  b->add_option("--stage", be.stage, "mel, waveform or both")->check(CLI::IsMember({"mel", "waveform", "both"}))
      ->capture_default_str();
  b->add_option("--out", be.out, "CSV output path");

  CountArgs co;
  auto* c = app.add_subcommand("count-params", "Report parameter counts per module");
  c->add_option("--config", co.config, "Config file or preset name");
  c->add_option("--checkpoint", co.checkpoint, "Count the tensors stored in a checkpoint")->check(CLI::ExistingFile);
  c->add_option("--ablation", co.ablation, "Model variant")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*p) return preprocess(pre);
    if (*t) return train(tr);
    if (*s) return synthesize(sy);
    if (*b) return benchmark(be);
    if (*c) {
      if (co.config.empty() && co.checkpoint.empty()) throw ConfigError("count-params needs --config or --checkpoint");
      return count(co);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
