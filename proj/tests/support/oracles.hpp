// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written independently of the library code paths
// they check. Slow and literal on purpose.

#pragma once

#include <cstdint>
#include <vector>

#include "pq/quant.hpp"
#include "pq/random.hpp"
#include "pq/tensor.hpp"

namespace pq::oracle {

/// Direct nested-loop cross-correlation; out-of-range taps read `pad_value`.
Tensor conv2d(const Tensor& input, const Tensor& weight, const std::vector<double>& bias,
              std::size_t stride, std::size_t pad, std::size_t groups, double pad_value);

/// Two-pass per-channel mean and population variance of [N,C,H,W] or [N,C].
void channel_moments(const Tensor& x, std::vector<double>& mean, std::vector<double>& var);

/// Monte-Carlo estimate of KL(N(m1,v1+eps) || N(m2,v2+eps)).
double monte_carlo_kl(double m1, double v1, double m2, double v2, double eps,
                      std::size_t samples, Rng& rng);

/// DuQ by enumerating the output grid and picking the level of the nearest
/// index (ties away from zero), computed from the mode-tied parameters.
double duq_nearest_level(double x, const QuantParams& q);

/// DuQ with the rounding replaced by the identity: the function whose
/// derivative the straight-through estimator reports.
double duq_surrogate(double x, double a, double b, double alpha, double beta, QuantMode mode);

/// PACT with rounding replaced by the identity: clip(x, 0, p).
double pact_surrogate(double x, double p);

/// Multiply-accumulate count of one conv layer by explicit loop counting.
std::uint64_t conv_macs_by_loops(std::size_t cin, std::size_t cout, std::size_t groups,
                                 std::size_t h, std::size_t w, std::size_t k,
                                 std::size_t stride, std::size_t pad);

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0);

}  // namespace pq::oracle
