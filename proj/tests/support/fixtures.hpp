// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Small networks and datasets shared by the unit tests.

#pragma once

#include <cstdint>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/trainer.hpp"

namespace pq::fixture {

/// MicroMobileNet on 8x8 inputs: stem, one separable block, dense head.
NetConfig tiny_net(std::size_t num_classes = 4);

/// Synthetic 8x8 data matching tiny_net().
Dataset tiny_data(std::uint64_t seed, std::size_t n, std::size_t num_classes = 4);

QuantConfig quant(int weight_bits, int act_bits);

/// Trainer over tiny_net() with batch size 16 and the given quantization.
Trainer tiny_trainer(std::uint64_t seed, const QuantConfig& q, TrainOptions opts = {});

/// Order-sensitive checksum over every value of a tensor map.
double checksum(const std::map<std::string, Tensor>& state);

}  // namespace pq::fixture
