// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Media ingestion: face-crop clips, audio, log-mel features, training
// windows, and a Griffin-Lim vocoder for debugging and the no-generator path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipspeech/rng.hpp"
#include "lipspeech/tensor.hpp"

namespace lipspeech::media {

/// 8-bit RGB image, row-major H x W x 3.
struct Image {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(Index h, Index w) : height(h), width(w), rgb(static_cast<std::size_t>(h * w * 3), 0) {}
  std::uint8_t& at(Index y, Index x, int c) { return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  std::uint8_t at(Index y, Index x, int c) const { return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  bool operator==(const Image&) const = default;
};

struct VideoClip {
  std::vector<Image> frames;
  double fps = 30.0;
  std::string source_id;

  Index frame_count() const { return static_cast<Index>(frames.size()); }
  double duration() const { return static_cast<double>(frames.size()) / fps; }
  /// Throws InputError unless frames are non-empty, equally sized and fps > 0.
  void validate() const;
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  Index size() const { return static_cast<Index>(samples.size()); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MelConfig {
  int sample_rate = 16000;
  Index n_fft = 1024;
  Index win_length = 800;
  Index hop = 200;
  Index n_mels = 80;
  double fmin = 55.0;
  double fmax = 7600.0;
  double log_floor = 1e-5;
  // Corpus log-mel range mapped onto [0, 1].
  double norm_min = -11.512925464970229;  // log(1e-5)
  double norm_max = 2.5;

  double frame_rate() const { return static_cast<double>(sample_rate) / static_cast<double>(hop); }
  /// ceil(samples / hop)
  Index frames_for(Index samples) const { return (samples + hop - 1) / hop; }
};

/// Frame-major log-mel matrix, values[t * bins + b].
struct MelSpectrogram {
  Index frames = 0;
  Index bins = 80;
  std::vector<double> values;
  Index hop = 200;
  Index window = 800;
  int sample_rate = 16000;

  double at(Index t, Index b) const { return values[static_cast<std::size_t>(t * bins + b)]; }
  /// [frames, bins] tensor copy.
  Tensor to_tensor() const;
  static MelSpectrogram from_tensor(const Tensor& t, const MelConfig& cfg);
};

struct CropBox {
  Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0, x1) x [y0, y1)
  Index width() const { return x1 - x0; }
  Index height() const { return y1 - y0; }
};

// --- clips -----------------------------------------------------------------

/// Crops each frame to its box and resizes to target_size x target_size.
VideoClip load_clip(std::span<const Image> frames, std::span<const CropBox> boxes,
                    Index target_size, double fps, std::string source_id = {});
/// Box covering the whole frame (the null face detector).
CropBox full_frame_box(const Image& frame);
Image crop_and_resize(const Image& src, const CropBox& box, Index out_w, Index out_h);
Image flip_horizontal(const Image& img);

struct AugmentPolicy {
  double flip_probability = 0.4;
  double crop_probability = 0.4;
  double max_crop_fraction = 0.072;
  Index target_size = 96;

  static AugmentPolicy none() { return {0.0, 0.0, 0.072, 96}; }
};

/// Per-clip flip and crop decisions; deterministic given the rng state.
VideoClip augment(const VideoClip& clip, Rng& rng, const AugmentPolicy& policy);

/// [T, H, W, 3] tensor with values in [0, 1].
Tensor clip_to_tensor(const VideoClip& clip);

// --- audio -----------------------------------------------------------------

/// Windowed-sinc resampling.
Waveform resample(const Waveform& in, int target_rate);
/// Scales so that max |x| <= 1 (no-op for already bounded audio).
void normalize_peak(Waveform& w);

/// Hann window of win_length centered in n_fft.
std::vector<double> analysis_window(const MelConfig& cfg);
/// Slaney-scale triangular filters, area normalized: [n_mels, n_fft/2+1].
std::vector<double> mel_filterbank(const MelConfig& cfg);
/// Center frequencies of the mel filters in Hz.
std::vector<double> mel_center_frequencies(const MelConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centered STFT magnitudes, reflect padded: [frames, n_fft/2+1], frames =
/// ceil(L / hop).
std::vector<double> stft_magnitude(std::span<const double> x, const MelConfig& cfg, Index* frames);

/// Raw log-mel (natural log with floor), [frames, n_mels].
std::vector<double> log_mel(std::span<const double> x, const MelConfig& cfg, Index* frames);
double normalize_log_mel(double v, const MelConfig& cfg);
double denormalize_log_mel(double v, const MelConfig& cfg);

/// Normalized log-mel spectrogram in [0, 1].
MelSpectrogram extract_mel(const Waveform& audio, const MelConfig& cfg);

/// Fits norm_min/norm_max to the log-mel range of a corpus.
MelConfig fit_mel_normalization(std::span<const Waveform> corpus, MelConfig cfg);

struct GriffinLimTrace {
  /// ||  |STFT(x_i)| - S || / || S || after each iteration.
  std::vector<double> spectral_convergence;
};

/// Inverts a normalized mel spectrogram: a smoothness-regularized
/// mel-to-linear solve, peak-locked phase initialization, then iterative
/// phase refinement. Output length frames * hop.
Waveform griffin_lim(const MelSpectrogram& mel, int iterations, const MelConfig& cfg,
                     GriffinLimTrace* trace = nullptr);

// --- training windows -------------------------------------------------------

struct TrainingSample {
  VideoClip clip;
  Waveform audio;
  MelSpectrogram mel;
  Index frame_offset = 0;
  Index sample_offset = 0;
};

struct WindowedDataset {
  std::vector<TrainingSample> samples;
  std::vector<std::string> warnings;
};

struct Shard {
  Index worker = 0;
  Index workers = 1;
};

/// Cuts aligned fixed-length windows. Worker k of n keeps windows k, k+n, ...
WindowedDataset window_dataset(const VideoClip& clip, const Waveform& audio,
                               double window_seconds, double stride_seconds,
                               const MelConfig& cfg, Shard shard = {});

// --- files -----------------------------------------------------------------

/// 16-bit PCM or 32-bit float WAV, mixed down to mono, resampled to target_rate.
Waveform read_wav(const std::filesystem::path& path, int target_rate = 16000);
/// 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// Binary PPM (P6, maxval 255).
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);
/// All *.ppm files in lexicographic order.
std::vector<Image> read_frame_directory(const std::filesystem::path& dir);
/// Writes frames as 000000.ppm, 000001.ppm, ... plus an fps sidecar.
void write_frame_directory(const std::filesystem::path& dir, const VideoClip& clip);
/// Reads a clip written by write_frame_directory (fps from "fps.txt" when present).
VideoClip read_clip_directory(const std::filesystem::path& dir, double default_fps = 30.0);
/// Decodes a video container with an external ffmpeg process. Throws
/// InputError when ffmpeg is unavailable.
std::vector<Image> decode_video(const std::filesystem::path& path, double* fps);

/// "frame_index x0 y0 x1 y1" per line.
std::vector<CropBox> read_crop_boxes(const std::filesystem::path& path);
void write_crop_boxes(const std::filesystem::path& path, std::span<const CropBox> boxes);

}  // namespace lipspeech::media
