// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/alignment.hpp"

#include <cmath>
#include <string>

#include "lipspeech/error.hpp"
#include "lipspeech/ops.hpp"

namespace lipspeech {

namespace {

// Ceiling that forgives the rounding error of products like 3 * (80 / 30).
Index tolerant_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<Index>(r);
  return static_cast<Index>(std::ceil(x));
}

}  // namespace

std::vector<Index> DuplicationPlan::source_index() const {
  std::vector<Index> src;
  src.reserve(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < counts.size(); ++i) src.insert(src.end(), static_cast<std::size_t>(counts[i]), static_cast<Index>(i));
  return src;
}

DuplicationPlan duplication_counts(Index frames, double fps, double mel_rate) {
  if (!(fps > 0.0) || !(mel_rate > 0.0)) throw ConfigError("frame and feature rates must be positive");
  if (frames < 1) throw ConfigError("frame count must be at least 1");
  const double d = mel_rate / fps;
  if (d < 1.0) throw ConfigError("feature rate must not be below the frame rate (every frame needs a row)");
  DuplicationPlan plan;
  plan.counts.resize(static_cast<std::size_t>(frames));
  Index prev = 0;
  for (Index i = 0; i < frames; ++i) {
    const Index next = tolerant_ceil(static_cast<double>(i + 1) * d);
    plan.counts[static_cast<std::size_t>(i)] = next - prev;
    prev = next;
  }
  plan.total = prev;
  return plan;
}

Tensor align(const Tensor& features, const DuplicationPlan& plan) {
  if (features.rank() < 1 || features.dim(0) != static_cast<Index>(plan.counts.size()))
    throw InternalError("alignment plan covers " + std::to_string(plan.counts.size()) + " frames but features have " +
                        (features.rank() ? std::to_string(features.dim(0)) : std::string("no")) + " rows");
  return ops::index_select0(features, plan.source_index());
}

Tensor truncate_rows(const Tensor& x, Index length) {
  if (x.dim(0) == length) return x;
  if (x.dim(0) < length) throw InternalError("cannot truncate " + std::to_string(x.dim(0)) + " rows to " + std::to_string(length));
  return ops::slice(x, 0, 0, length);
}

}  // namespace lipspeech
