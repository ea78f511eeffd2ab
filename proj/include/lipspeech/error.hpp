// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lipspeech {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent caller-supplied data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or incompatible option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A broken internal contract (shape mismatch between our own stages).
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Input error attributable to one frame of a clip.
class FrameError : public InputError {
 public:
  FrameError(std::size_t frame_index, const std::string& what)
      : InputError("frame " + std::to_string(frame_index) + ": " + what),
        frame_index_(frame_index) {}

  std::size_t frame_index() const noexcept { return frame_index_; }

 private:
  std::size_t frame_index_;
};

}  // namespace lipspeech
