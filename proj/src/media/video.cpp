// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lipspeech/error.hpp"
#include "lipspeech/media_io.hpp"

namespace lipspeech::media {

void VideoClip::validate() const {
  if (frames.empty()) throw InputError("clip '" + source_id + "' has no frames");
  if (!(fps > 0.0)) throw InputError("clip '" + source_id + "' has non-positive fps");
  const Index h = frames[0].height, w = frames[0].width;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Image& f = frames[i];
    if (f.height != h || f.width != w)
      throw FrameError(i, "size " + std::to_string(f.width) + "x" + std::to_string(f.height) +
                              " differs from first frame " + std::to_string(w) + "x" +
                              std::to_string(h));
    if (f.rgb.size() != static_cast<std::size_t>(h * w * 3))
      throw FrameError(i, "pixel buffer size mismatch");
  }
}

CropBox full_frame_box(const Image& frame) { return {0, 0, frame.width, frame.height}; }

Image crop_and_resize(const Image& src, const CropBox& box, Index out_w, Index out_h) {
  Image out(out_h, out_w);
  const double sx = static_cast<double>(box.width()) / static_cast<double>(out_w);
  const double sy = static_cast<double>(box.height()) / static_cast<double>(out_h);
  for (Index y = 0; y < out_h; ++y) {
    // Pixel-center mapping; an identity-sized crop samples exact pixels.
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(box.height() - 1));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, box.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Index x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(box.width() - 1));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, box.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (int c = 0; c < 3; ++c) {
        const double a = src.at(box.y0 + y0, box.x0 + x0, c);
        const double b = src.at(box.y0 + y0, box.x0 + x1, c);
        const double d = src.at(box.y0 + y1, box.x0 + x0, c);
        const double e = src.at(box.y0 + y1, box.x0 + x1, c);
        const double v = (a * (1 - wx) + b * wx) * (1 - wy) + (d * (1 - wx) + e * wx) * wy;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

VideoClip load_clip(std::span<const Image> frames, std::span<const CropBox> boxes,
                    Index target_size, double fps, std::string source_id) {
  if (frames.size() != boxes.size())
    throw InputError("crop box count " + std::to_string(boxes.size()) + " does not match frame count " +
                     std::to_string(frames.size()));
  if (frames.empty()) throw InputError("no frames to load");
  if (target_size <= 0) throw ConfigError("target size must be positive");
  VideoClip clip;
  clip.fps = fps;
  clip.source_id = std::move(source_id);
  clip.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const CropBox& b = boxes[i];
    if (b.width() <= 0 || b.height() <= 0) throw FrameError(i, "degenerate crop box");
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > frames[i].width || b.y1 > frames[i].height)
      throw FrameError(i, "crop box outside frame bounds");
    clip.frames.push_back(crop_and_resize(frames[i], b, target_size, target_size));
  }
  clip.validate();
  return clip;
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

VideoClip augment(const VideoClip& clip, Rng& rng, const AugmentPolicy& policy) {
  auto check_prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
  };
  check_prob(policy.flip_probability, "flip probability");
  check_prob(policy.crop_probability, "crop probability");
  if (!(policy.max_crop_fraction >= 0.0 && policy.max_crop_fraction <= 0.072))
    throw ConfigError("crop fraction bound must lie in [0, 0.072]");
  clip.validate();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < policy.flip_probability;
  const bool crop = unit(rng) < policy.crop_probability;
  const double fraction = unit(rng) * policy.max_crop_fraction;
  const bool horizontal = unit(rng) < 0.5;
  const double offset_u = unit(rng);

  const Index h = clip.frames[0].height, w = clip.frames[0].width;
  CropBox box{0, 0, w, h};
  if (crop) {
    const Index span = horizontal ? w : h;
    const Index removed = std::min<Index>(span - 1, std::lround(fraction * static_cast<double>(span)));
    const Index lead = std::lround(offset_u * static_cast<double>(removed));
    if (horizontal) {
      box.x0 = lead;
      box.x1 = w - (removed - lead);
    } else {
      box.y0 = lead;
      box.y1 = h - (removed - lead);
    }
  }
  const bool resize = crop || h != policy.target_size || w != policy.target_size;

  VideoClip out;
  out.fps = clip.fps;
  out.source_id = clip.source_id;
  out.frames.reserve(clip.frames.size());
  for (const Image& f : clip.frames) {
    Image g = resize ? crop_and_resize(f, box, policy.target_size, policy.target_size) : f;
    out.frames.push_back(flip ? flip_horizontal(g) : std::move(g));
  }
  return out;
}

Tensor clip_to_tensor(const VideoClip& clip) {
  clip.validate();
  const Index t = clip.frame_count(), h = clip.frames[0].height, w = clip.frames[0].width;
  Tensor out({t, h, w, 3});
  auto v = out.data();
  const std::size_t per = static_cast<std::size_t>(h * w * 3);
  for (Index i = 0; i < t; ++i)
    for (std::size_t j = 0; j < per; ++j)
      v[static_cast<std::size_t>(i) * per + j] = clip.frames[static_cast<std::size_t>(i)].rgb[j] / 255.0;
  return out;
}

// --- PPM / frame directories ------------------------------------------------

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  return {};
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  if (next_token(in) != "P6") throw InputError(path.string() + ": not a binary PPM (P6)");
  const Index w = std::stol(next_token(in));
  const Index h = std::stol(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (maxval != 255) throw InputError(path.string() + ": only maxval 255 supported");
  in.get();
  Image img(h, w);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!in) throw InputError(path.string() + ": truncated pixel data");
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

std::vector<Image> read_frame_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError(dir.string() + " contains no .ppm frames");
  std::vector<Image> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_ppm(f));
  return frames;
}

void write_frame_directory(const std::filesystem::path& dir, const VideoClip& clip) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "%06zu.ppm", i);
    write_ppm(dir / name, clip.frames[i]);
  }
  std::ofstream(dir / "fps.txt") << clip.fps << '\n';
}

VideoClip read_clip_directory(const std::filesystem::path& dir, double default_fps) {
  VideoClip clip;
  clip.frames = read_frame_directory(dir);
  clip.fps = default_fps;
  clip.source_id = dir.filename().string();
  if (std::ifstream f(dir / "fps.txt"); f) f >> clip.fps;
  clip.validate();
  return clip;
}

std::vector<Image> decode_video(const std::filesystem::path& path, double* fps) {
  if (!std::filesystem::exists(path)) throw InputError("no such video " + path.string());
  auto run = [](const std::string& cmd) {
    std::string out;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    if (::pclose(p) != 0) out.clear();
    return out;
  };
  const std::string quoted = "'" + path.string() + "'";
  const std::string probe = run(
      "ffprobe -v error -select_streams v:0 -show_entries stream=width,height,r_frame_rate "
      "-of csv=p=0 " + quoted + " 2>/dev/null");
  if (probe.empty())
    throw InputError("ffprobe/ffmpeg not available or cannot read " + path.string() +
                     "; pass a directory of pre-extracted .ppm frames instead");
  Index w = 0, h = 0;
  int num = 0, den = 1;
  if (std::sscanf(probe.c_str(), "%ld,%ld,%d/%d", &w, &h, &num, &den) < 3 || w <= 0 || h <= 0)
    throw InputError("cannot parse stream info for " + path.string());
  if (fps) *fps = den ? static_cast<double>(num) / den : 0.0;
  const std::string raw =
      run("ffmpeg -v error -i " + quoted + " -f rawvideo -pix_fmt rgb24 - 2>/dev/null");
  const std::size_t frame_bytes = static_cast<std::size_t>(w * h * 3);
  if (raw.size() < frame_bytes) throw InputError("ffmpeg produced no frames for " + path.string());
  std::vector<Image> frames;
  for (std::size_t off = 0; off + frame_bytes <= raw.size(); off += frame_bytes) {
    Image img(h, w);
    std::copy_n(raw.data() + off, frame_bytes, reinterpret_cast<char*>(img.rgb.data()));
    frames.push_back(std::move(img));
  }
  return frames;
}

// --- crop-box sidecar -------------------------------------------------------

std::vector<CropBox> read_crop_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open crop boxes " + path.string());
  std::vector<CropBox> boxes;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Index idx;
    CropBox b;
    if (!(ls >> idx >> b.x0 >> b.y0 >> b.x1 >> b.y1))
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected 'frame_index x0 y0 x1 y1'");
    if (idx != static_cast<Index>(boxes.size()))
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": frame index " +
                       std::to_string(idx) + " out of sequence");
    boxes.push_back(b);
  }
  return boxes;
}

void write_crop_boxes(const std::filesystem::path& path, std::span<const CropBox> boxes) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < boxes.size(); ++i)
    out << i << ' ' << boxes[i].x0 << ' ' << boxes[i].y0 << ' ' << boxes[i].x1 << ' ' << boxes[i].y1 << '\n';
}

}  // namespace lipspeech::media
