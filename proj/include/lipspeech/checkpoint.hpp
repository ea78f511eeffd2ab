// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

// Binary tensor archive: "LIPSCKPT", a length-prefixed JSON header with the
// config, step and entry table, then little-endian float64 payloads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lipspeech/nn.hpp"

namespace lipspeech {

struct Archive {
  std::string config_json;
  Index step = 0;
  int stage = 0;
  std::map<std::string, std::string> meta;
  nn::NamedTensors tensors;

  const Tensor* find(const std::string& name) const;
  /// Deep-copies src under prefix.
  void append(const std::string& prefix, const nn::NamedTensors& src);
};

/// Writes atomically (temporary file, then rename).
void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

/// Copies every archive entry under prefix into the matching destination
/// tensor. Throws ConfigError naming every missing, unexpected or
/// differently shaped entry.
void restore(const nn::NamedTensors& dst, const Archive& archive, const std::string& prefix);

/// FNV-1a over names, shapes and value bytes.
std::uint64_t tensor_hash(const nn::NamedTensors& tensors);

}  // namespace lipspeech
