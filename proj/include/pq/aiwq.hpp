// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Activation instability induced by weight quantization. A layer's metric is
// the channel-averaged KL divergence between Gaussian fits of its pre-norm
// output before and after one weight update, evaluated on the same batch.

#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/tensor.hpp"
#include "pq/trainer.hpp"

namespace pq {

inline constexpr double kAiwqEps = 1e-5;

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> var;  // population variance
};

/// Per-channel moments of [N,C,H,W] (or [N,C]) over every non-channel axis.
ChannelStats channel_stats(const Tensor& activations);

struct ChannelStatsPair {
  std::vector<double> mean_before, var_before;
  std::vector<double> mean_after, var_after;

  std::size_t channels() const { return mean_before.size(); }
  /// Throws when sizes disagree, variances are negative or values non-finite.
  void validate() const;
};

ChannelStatsPair stats_pair(const Tensor& before, const Tensor& after);

/// KL(N(m1,v1) || N(m2,v2)) with `eps` added to both variances.
double gaussian_kl(double m1, double v1, double m2, double v2, double eps = kAiwqEps);

/// Channel mean of gaussian_kl(before, after).
double layer_aiwq(const ChannelStatsPair& stats, double eps = kAiwqEps);

struct AiwqReport {
  std::map<std::size_t, double> per_layer;
  std::map<std::size_t, std::string> layer_names;
  std::size_t iterations_sampled = 0;

  double mean() const;
  /// Layer ids by metric, largest first; ties keep the lower id first.
  std::vector<std::size_t> descending() const;
};

/// Runs `iterations` ordinary training steps at rate `lr` on batches drawn
/// from `data`, accumulating each quantized layer's metric. Mutates `trainer`.
AiwqReport sample_aiwq(Trainer& trainer, const Dataset& data, std::size_t iterations,
                       double lr);

/// layer_id,layer_name,metric sorted by metric descending.
void write_aiwq_csv(const AiwqReport& report, std::ostream& out);

}  // namespace pq
