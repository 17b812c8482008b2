// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pq/cost.hpp"

namespace pq {
namespace {

NetConfig single_conv() {
  NetConfig n;
  n.in_channels = 16;
  n.in_height = n.in_width = 8;
  n.num_classes = 10;
  n.layers = {{LayerKind::conv, 32, 3, 1, Activation::relu, true},
              {LayerKind::dense, 10, 1, 1, Activation::none, true}};
  return n;
}

TEST(Bops, ConvExample) {
  const BopsReport r = bops_report(single_conv(), 4, 4);
  EXPECT_EQ(r.rows[0].macs, 294912u);
  EXPECT_EQ(r.rows[0].bops, 4718592u);
  EXPECT_EQ(r.rows[1].macs, 320u);
  EXPECT_EQ(r.total_bops, (294912u + 320u) * 16u);
}

TEST(Bops, ModelSizeOfThousandFourBitWeights) {
  NetConfig n;
  n.in_channels = 100;
  n.in_height = n.in_width = 1;
  n.num_classes = 10;
  n.layers = {{LayerKind::dense, 10, 1, 1, Activation::none, true}};
  const BopsReport r = bops_report(n, 4, 4);
  EXPECT_EQ(r.rows[0].num_weights, 1000u);
  EXPECT_EQ(r.rows[0].size_bytes, 500.0);
  EXPECT_EQ(r.total_size_bytes, 500.0);
}

TEST(Bops, HalvingBothWidthsQuartersTotal) {
  for (const NetConfig& n : {single_conv(), micro_mobilenet({}),
                             micro_mobilenet({3, 32, 100, 16, {24, 48, 64}, {2, 2, 1}})}) {
    const BopsReport a = bops_report(n, 4, 4), b = bops_report(n, 8, 8);
    EXPECT_EQ(a.total_bops * 4, b.total_bops);
    EXPECT_EQ(static_cast<double>(a.total_bops) / static_cast<double>(b.total_bops), 0.25);
  }
}

TEST(Bops, PerLayerMacsMatchLoopCount) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    MicroMobileNetOptions o;
    o.in_channels = 1 + rng.below(3);
    o.in_size = 6 + rng.below(12);
    o.stem_width = 2 + rng.below(6);
    o.block_widths.clear();
    o.block_strides.clear();
    for (std::size_t b = 0, nb = 1 + rng.below(3); b < nb; ++b) {
      o.block_widths.push_back(2 + rng.below(10));
      o.block_strides.push_back(1 + rng.below(2));
    }
    const NetConfig n = micro_mobilenet(o);
    const BopsReport r = bops_report(n, 3, 5);
    std::size_t c = n.in_channels, h = n.in_height, w = n.in_width;
    for (std::size_t i = 0; i < n.layers.size(); ++i) {
      const LayerSpec& s = n.layers[i];
      std::uint64_t want = 0;
      if (s.kind == LayerKind::dense) {
        want = oracle::conv_macs_by_loops(c, s.out_channels, 1, 1, 1, 1, 1, 0);
        c = s.out_channels;
      } else {
        const std::size_t cout = s.kind == LayerKind::depthwise ? c : s.out_channels;
        const std::size_t groups = s.kind == LayerKind::depthwise ? c : 1;
        const std::size_t pad = s.kernel / 2;
        want = oracle::conv_macs_by_loops(c, cout, groups, h, w, s.kernel, s.stride, pad);
        h = (h + 2 * pad - s.kernel) / s.stride + 1;
        w = (w + 2 * pad - s.kernel) / s.stride + 1;
        c = cout;
      }
      EXPECT_EQ(r.rows[i].macs, want) << i;
      EXPECT_EQ(r.rows[i].bops, want * 15);
    }
  }
}

TEST(Bops, FirstLayerAndUnquantizedExceptions) {
  NetConfig n = single_conv();
  n.layers[1].quantized = false;
  CostOptions o;
  o.first_layer_act_bits = 8;
  o.unquantized_bits = 16;
  const BopsReport r = bops_report(n, 4, 4, o);
  EXPECT_EQ(r.rows[0].weight_bits, 4);
  EXPECT_EQ(r.rows[0].act_bits, 8);
  EXPECT_EQ(r.rows[1].weight_bits, 16);
  EXPECT_EQ(r.rows[1].bops, 320u * 256u);
}

TEST(Bops, ErrorsAndCsv) {
  EXPECT_THROW(bops_report(single_conv(), std::vector<LayerBits>{{4, 4}}), Error);
  EXPECT_THROW(bops_report(single_conv(), 0, 4), Error);
  std::ostringstream out;
  write_bops_csv(bops_report(single_conv(), 4, 4), out);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("layer_id,layer_name,macs,weight_bits,act_bits,bops,num_weights,size_bytes\n",
                    0),
            0u);
  EXPECT_NE(s.find("\n0,L0.conv,294912,4,4,4718592,4608,2304\n"), std::string::npos);
  EXPECT_NE(s.find("\ntotal,,295232,,,4723712,,2464\n"), std::string::npos);
}

}  // namespace
}  // namespace pq
