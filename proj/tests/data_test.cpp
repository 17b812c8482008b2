// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "pq/data.hpp"
#include "pq/trainer.hpp"

namespace pq {
namespace {

namespace fs = std::filesystem;

class IdxTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("pq_data_test_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_bytes(const std::string& name, const std::vector<unsigned char>& bytes) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    return p;
  }

  fs::path dir;
};

TEST_F(IdxTest, RoundTripIsIdentityOnByteGrid) {
  Dataset d;
  d.images = Tensor({3, 1, 2, 4});
  for (std::size_t i = 0; i < d.images.numel(); ++i) {
    d.images[i] = static_cast<double>((i * 37) % 256) / 255.0;
  }
  d.labels = {2, 0, 7};
  d.num_classes = 8;
  write_idx(d, dir / "img", dir / "lbl");
  const Dataset r = load_idx(dir / "img", dir / "lbl");
  EXPECT_EQ(r.images.shape(), d.images.shape());
  EXPECT_TRUE(r.images.bitwise_equal(d.images));
  EXPECT_EQ(r.labels, d.labels);
  EXPECT_EQ(r.num_classes, 8u);
}

TEST_F(IdxTest, HeaderDeclaresShape) {
  // 2 images of 28x28 plus labels.
  std::vector<unsigned char> img{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28};
  img.resize(img.size() + 2 * 28 * 28, 255);
  const auto ip = write_bytes("img", img);
  const auto lp = write_bytes("lbl", {0, 0, 8, 1, 0, 0, 0, 2, 4, 9});
  const Dataset d = load_idx(ip, lp);
  EXPECT_EQ(d.images.shape(), (Shape{2, 1, 28, 28}));
  EXPECT_EQ(d.images[0], 1.0);
  EXPECT_EQ(d.labels, (std::vector<int>{4, 9}));
}

TEST_F(IdxTest, TruncatedPayload) {
  std::vector<unsigned char> img{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3};
  const auto ip = write_bytes("img", img);
  const auto lp = write_bytes("lbl", {0, 0, 8, 1, 0, 0, 0, 2, 0, 1});
  EXPECT_THROW(load_idx(ip, lp), IdxError);
}

TEST_F(IdxTest, TruncatedHeader) {
  const auto ip = write_bytes("img", {0, 0, 8, 3, 0, 0});
  const auto lp = write_bytes("lbl", {0, 0, 8, 1, 0, 0, 0, 1, 0});
  EXPECT_THROW(load_idx(ip, lp), IdxError);
}

TEST_F(IdxTest, BadMagicAndType) {
  const auto lp = write_bytes("lbl", {0, 0, 8, 1, 0, 0, 0, 1, 0});
  EXPECT_THROW(load_idx(write_bytes("a", {1, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 5}), lp),
               IdxError);
  EXPECT_THROW(load_idx(write_bytes("b", {0, 0, 13, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 5}),
                        lp),
               IdxError);
}

TEST_F(IdxTest, DimensionMismatches) {
  const auto img = write_bytes("img", {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 5});
  EXPECT_THROW(load_idx(img, write_bytes("l2", {0, 0, 8, 1, 0, 0, 0, 2, 0, 1})), IdxError);
  EXPECT_THROW(load_idx(img, img), IdxError);
  EXPECT_THROW(load_idx(dir / "missing", dir / "missing"), IdxError);
}

TEST(Synth, SameSeedIsBitwiseIdentical) {
  const Dataset a = synth_dataset(5, 10, 200), b = synth_dataset(5, 10, 200);
  EXPECT_TRUE(a.images.bitwise_equal(b.images));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_FALSE(synth_dataset(6, 10, 200).images.bitwise_equal(a.images));
}

TEST(Synth, BalancedLabelsAndUnitRange) {
  const Dataset d = synth_dataset(1, 10, 1003);
  std::map<int, int> hist;
  for (int y : d.labels) ++hist[y];
  ASSERT_EQ(hist.size(), 10u);
  int lo = 1 << 30, hi = 0;
  for (const auto& [k, c] : hist) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  EXPECT_LE(hi - lo, 1);
  for (double v : d.images.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_EQ(d.images.shape(), (Shape{1003, 1, 16, 16}));
}

TEST(Synth, Errors) {
  EXPECT_THROW(synth_dataset(1, 1, 10), Error);
  EXPECT_THROW(synth_dataset(1, 10, 9), Error);
}

TEST(Synth, FullPrecisionNetLearnsTaskWithinFiveEpochs) {
  const Dataset train = synth_dataset(derive_seed(1, 1), 10, 2000);
  const Dataset test = synth_dataset(derive_seed(1, 2), 10, 1000);
  Trainer t(Network(micro_mobilenet({}), 3), TrainOptions{}, 4);
  t.run_stage("fp", train, 5, StageOptions{});
  EXPECT_GE(t.evaluate(test, false).top1, 0.95);
}

TEST(DatasetView, SubsetAndSlice) {
  const Dataset d = synth_dataset(2, 4, 8);
  const std::vector<std::size_t> idx{3, 0};
  const Dataset s = d.subset(idx);
  EXPECT_EQ(s.labels, (std::vector<int>{3, 0}));
  EXPECT_EQ(s.images.dim(0), 2u);
  EXPECT_EQ(d.slice(6, 100).size(), 2u);
  const std::vector<std::size_t> bad{8};
  EXPECT_THROW(d.subset(bad), Error);
}

}  // namespace
}  // namespace pq
