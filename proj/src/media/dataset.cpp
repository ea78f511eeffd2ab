// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <cmath>
#include <sstream>

#include "lipspeech/error.hpp"
#include "lipspeech/media_io.hpp"

namespace lipspeech::media {

WindowedDataset window_dataset(const VideoClip& clip, const Waveform& audio, double window_seconds,
                               double stride_seconds, const MelConfig& cfg, Shard shard) {
  clip.validate();
  if (!(window_seconds > 0.0) || !(stride_seconds > 0.0)) throw ConfigError("window and stride must be positive");
  if (shard.workers <= 0 || shard.worker < 0 || shard.worker >= shard.workers)
    throw ConfigError("invalid shard " + std::to_string(shard.worker) + "/" + std::to_string(shard.workers));
  if (audio.sample_rate != cfg.sample_rate) throw InputError("audio sample rate differs from mel configuration");

  const double sr = audio.sample_rate;
  const double fps = clip.fps;
  // Audio and video must describe the same span to within one frame.
  const double frames_d = static_cast<double>(clip.frame_count());
  const double samples_d = static_cast<double>(audio.size());
  if (std::abs(frames_d * sr - samples_d * fps) > sr) {
    std::ostringstream msg;
    msg << "clip '" << clip.source_id << "': " << clip.frame_count() << " frames at " << fps << " fps vs "
        << audio.size() << " samples at " << sr << " Hz";
    throw InputError(msg.str());
  }

  const auto window_frames = static_cast<Index>(std::llround(window_seconds * fps));
  const auto window_samples = static_cast<Index>(std::llround(window_seconds * sr));
  const auto stride_frames = std::max<Index>(1, std::llround(stride_seconds * fps));

  WindowedDataset out;
  if (clip.frame_count() < window_frames || audio.size() < window_samples) {
    std::ostringstream msg;
    msg << "clip '" << clip.source_id << "' (" << clip.duration() << " s) is shorter than the "
        << window_seconds << " s window; skipped";
    out.warnings.push_back(msg.str());
    return out;
  }

  Index index = 0;
  for (Index f = 0; f + window_frames <= clip.frame_count(); f += stride_frames, ++index) {
    const auto s = static_cast<Index>(std::llround(static_cast<double>(f) * sr / fps));
    if (s + window_samples > audio.size()) break;
    if (index % shard.workers != shard.worker) continue;
    TrainingSample sample;
    sample.frame_offset = f;
    sample.sample_offset = s;
    sample.clip.fps = fps;
    sample.clip.source_id = clip.source_id;
    sample.clip.frames.assign(clip.frames.begin() + f, clip.frames.begin() + f + window_frames);
    sample.audio.sample_rate = audio.sample_rate;
    sample.audio.samples.assign(audio.samples.begin() + s, audio.samples.begin() + s + window_samples);
    sample.mel = extract_mel(sample.audio, cfg);
    out.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace lipspeech::media
