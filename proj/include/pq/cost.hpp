// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pq/model.hpp"

namespace pq {

struct LayerBits {
  int weight_bits = 32;
  int act_bits = 32;
};

struct BopsRow {
  std::size_t layer_id = 0;
  std::string layer_name;
  std::uint64_t macs = 0;
  int weight_bits = 32;
  int act_bits = 32;
  std::uint64_t bops = 0;  // macs * weight_bits * act_bits
  std::uint64_t num_weights = 0;
  double size_bytes = 0.0;  // num_weights * weight_bits / 8
};

struct BopsReport {
  std::vector<BopsRow> rows;
  std::uint64_t total_macs = 0;
  std::uint64_t total_bops = 0;
  double total_size_bytes = 0.0;
};

struct CostOptions {
  /// Input bit-width of the first layer (e.g. 8 for raw image bytes).
  /// Defaults to the network-wide activation width.
  std::optional<int> first_layer_act_bits;
  /// Bit-width charged to layers marked as not quantized.
  int unquantized_bits = 32;
};

/// Explicit widths for every layer of `net`.
BopsReport bops_report(const NetConfig& net, const std::vector<LayerBits>& bits);

/// Uniform (weight_bits, act_bits) on quantized layers with the exceptions in
/// `opts`.
BopsReport bops_report(const NetConfig& net, int weight_bits, int act_bits,
                       const CostOptions& opts = {});

void write_bops_csv(const BopsReport& report, std::ostream& out);

}  // namespace pq
