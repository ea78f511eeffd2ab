// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <vector>

#include "lipspeech/tensor.hpp"

namespace lipspeech {

/// Per-frame repeat counts that stretch video-rate features to mel rate.
struct DuplicationPlan {
  std::vector<Index> counts;
  Index total = 0;

  /// Source frame of every output row.
  std::vector<Index> source_index() const;
};

/// counts_i = ceil((i+1) d) - ceil(i d) with d = mel_rate / fps >= 1.
DuplicationPlan duplication_counts(Index frames, double fps, double mel_rate);

/// features [T, d] -> [plan.total, d]; row j copies its source frame.
Tensor align(const Tensor& features, const DuplicationPlan& plan);

/// Crops a [L, ...] tensor to its first `length` rows.
Tensor truncate_rows(const Tensor& x, Index length);

}  // namespace lipspeech
