// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

namespace pq::fixture {

NetConfig tiny_net(std::size_t num_classes) {
  MicroMobileNetOptions o;
  o.in_size = 8;
  o.num_classes = num_classes;
  o.stem_width = 4;
  o.block_widths = {8};
  o.block_strides = {2};
  return micro_mobilenet(o);
}

Dataset tiny_data(std::uint64_t seed, std::size_t n, std::size_t num_classes) {
  SynthOptions s;
  s.size = 8;
  return synth_dataset(seed, num_classes, n, s);
}

QuantConfig quant(int weight_bits, int act_bits) {
  QuantConfig q;
  q.weight_bits = weight_bits;
  q.act_bits = act_bits;
  return q;
}

Trainer tiny_trainer(std::uint64_t seed, const QuantConfig& q, TrainOptions opts) {
  Network net(tiny_net(), seed);
  net.configure_quantization(q);
  opts.batch_size = 16;
  return Trainer(std::move(net), opts, seed + 1000);
}

double checksum(const std::map<std::string, Tensor>& state) {
  double s = 0.0, k = 1.0;
  for (const auto& [name, t] : state) {
    for (double v : t.data()) {
      s += v * k;
      k = k * 1.000003 + 1e-7;
    }
  }
  return s;
}

}  // namespace pq::fixture
