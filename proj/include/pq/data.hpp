// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pq/tensor.hpp"

namespace pq {

struct Dataset {
  Tensor images;  // [N,C,H,W], values in [0,1]
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape item_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  /// Gathers the listed items into a batch.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Items [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
};

class IdxError : public Error {
 public:
  using Error::Error;
};

/// Reads an IDX image file (ubyte, 3 or 4 dims) and label file (ubyte, 1 dim).
/// Pixels are scaled to [0,1]. Throws IdxError on bad magic, truncation or
/// count mismatch.
Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels);

/// Writes images as round(255*v) bytes. load_idx(write_idx(d)) == d whenever
/// the pixels of d are multiples of 1/255.
void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

struct SynthOptions {
  std::size_t size = 16;
  /// Standard deviation of additive pixel noise.
  double noise = 0.3;
};

/// Procedural grating images. Class k fixes orientation (k mod 5) * 36 deg and
/// spatial frequency (k < 5 ? low : high); phase, contrast and noise are drawn
/// per image. Labels are assigned round-robin so classes are balanced within 1.
/// The class signal is fully determined by (orientation, frequency), so the
/// task is separable up to the injected noise.
Dataset synth_dataset(std::uint64_t seed, std::size_t num_classes, std::size_t n,
                      const SynthOptions& opts = {});

}  // namespace pq
