// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/cost.hpp"

namespace pq {

BopsReport bops_report(const NetConfig& net, const std::vector<LayerBits>& bits) {
  const Network shape_only(net, 0);
  const auto& layers = shape_only.layers();
  if (bits.size() != layers.size()) {
    throw Error("bops_report: " + std::to_string(bits.size()) + " bit entries for " +
                std::to_string(layers.size()) + " layers");
  }
  BopsReport r;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& L = layers[i];
    if (bits[i].weight_bits <= 0 || bits[i].act_bits <= 0) {
      throw Error("bops_report: bit-widths must be positive");
    }
    BopsRow row;
    row.layer_id = L.id;
    row.layer_name = L.name;
    row.macs = L.macs();
    row.weight_bits = bits[i].weight_bits;
    row.act_bits = bits[i].act_bits;
    row.bops = row.macs * static_cast<std::uint64_t>(row.weight_bits) *
               static_cast<std::uint64_t>(row.act_bits);
    row.num_weights = L.num_weights();
    row.size_bytes = static_cast<double>(row.num_weights) * row.weight_bits / 8.0;
    r.total_macs += row.macs;
    r.total_bops += row.bops;
    r.total_size_bytes += row.size_bytes;
    r.rows.push_back(std::move(row));
  }
  return r;
}

BopsReport bops_report(const NetConfig& net, int weight_bits, int act_bits,
                       const CostOptions& opts) {
  std::vector<LayerBits> bits;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    LayerBits b{opts.unquantized_bits, opts.unquantized_bits};
    if (net.layers[i].quantized) b = {weight_bits, act_bits};
    if (i == 0 && opts.first_layer_act_bits) b.act_bits = *opts.first_layer_act_bits;
    bits.push_back(b);
  }
  return bops_report(net, bits);
}

void write_bops_csv(const BopsReport& r, std::ostream& out) {
  out << "layer_id,layer_name,macs,weight_bits,act_bits,bops,num_weights,size_bytes\n";
  for (const BopsRow& row : r.rows) {
    out << row.layer_id << ',' << row.layer_name << ',' << row.macs << ',' << row.weight_bits
        << ',' << row.act_bits << ',' << row.bops << ',' << row.num_weights << ','
        << row.size_bytes << '\n';
  }
  out << "total,," << r.total_macs << ",,," << r.total_bops << ",," << r.total_size_bytes
      << '\n';
}

}  // namespace pq
