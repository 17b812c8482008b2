// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// A conv whose input a >= m is padded with m equals a zero-padded conv over
// the shifted input (a - m) plus the per-channel constant m * sum(weight).
// The shifted input is non-negative, so its bottom level is exactly zero.

#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/ops.hpp"
#include "pq/random.hpp"

namespace pq {

/// a - m elementwise.
Tensor shift_decompose(const Tensor& activations, double m);

/// bias[o] = m * sum of weight[o, ...].
Tensor negpad_bias(const Tensor& weight, double m);

/// Zero-padded conv of `shifted` plus `bias` broadcast over space.
/// `opts.pad_value` is ignored.
Tensor negpad_conv(const Tensor& shifted, const Tensor& weight, const Tensor& bias,
                   const Conv2dOptions& opts);

struct NegPadRewrite {
  double shift_m = 0.0;
  Tensor weight;
  Tensor bias_c;
  Conv2dOptions conv;  // geometry of the original conv; pad_value == shift_m

  static NegPadRewrite make(const Tensor& weight, double m, std::size_t stride,
                            std::size_t pad, std::size_t groups);

  /// conv2d(a, weight) padded with shift_m.
  Tensor original(const Tensor& a) const;
  /// negpad_conv(a - shift_m, weight, bias_c).
  Tensor rewritten(const Tensor& a) const;
};

/// Max |rewritten - original| over `trials` random inputs of `input_shape`.
/// Inputs are h-swish outputs, passed through `act_quant` when given.
double verify_rewrite(const NegPadRewrite& rewrite, const Shape& input_shape,
                      std::size_t trials, Rng& rng,
                      const std::optional<QuantParams>& act_quant = std::nullopt);

struct NegPadLayerReport {
  std::size_t layer_id = 0;
  std::string layer_name;
  double shift_m = 0.0;
  double max_abs_error = 0.0;
  /// Fraction of exact zeros among the layer's shifted (quantized) inputs.
  double zero_fraction = 0.0;
};

/// Checks every conv layer padded with a nonzero value on the real inputs it
/// sees for `data` (eval mode) plus `trials` random inputs per layer.
std::vector<NegPadLayerReport> verify_network(const Network& net, const Dataset& data,
                                              std::size_t trials, std::uint64_t seed);

/// layer_id,layer_name,max_abs_error,zero_fraction
void write_negpad_csv(const std::vector<NegPadLayerReport>& rows, std::ostream& out);

}  // namespace pq
