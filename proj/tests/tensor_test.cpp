// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "pq/autograd.hpp"
#include "pq/ops.hpp"
#include "pq/tensor.hpp"

namespace pq {
namespace {

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(shape_numel(t.shape()), t.numel());
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r[5], 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, CopiesAreDeep) {
  Tensor a({3}, 1.0);
  Tensor b = a;
  b[0] = 7.0;
  EXPECT_EQ(a[0], 1.0);
}

TEST(Tensor, BitwiseEqualDistinguishesSignedZero) {
  Tensor a({1}, 0.0), b({1}, -0.0);
  EXPECT_FALSE(a.bitwise_equal(b));
  EXPECT_TRUE(a.bitwise_equal(Tensor({1}, 0.0)));
  EXPECT_FALSE(a.bitwise_equal(Tensor({1, 1}, 0.0)));
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(check_finite(t, "test"), NumericError);
}

TEST(Autograd, GradientAccumulatesOverSharedInputs) {
  Var x(Tensor({2}, std::vector<double>{1.0, -2.0}), true);
  // loss = sum(w*x) + sum(w*(3x)) => d/dx = 4w
  const Tensor w({2}, std::vector<double>{0.5, 2.0});
  Var loss = add(weighted_sum(x, w), weighted_sum(scale(x, 3.0), w));
  backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
}

TEST(Autograd, NoGradGuardBuildsNoGraph) {
  Var x(Tensor({2}, 1.0), true);
  {
    NoGradGuard guard;
    Var y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Autograd, LeavesWithoutRequiresGradGetNoGradient) {
  Var x(Tensor({2}, 1.0), false);
  Var y(Tensor({2}, 2.0), true);
  backward(weighted_sum(add(x, y), Tensor({2}, 1.0)));
  EXPECT_FALSE(x.has_grad());
  EXPECT_TRUE(y.has_grad());
}

TEST(Autograd, DeepCopyIsIndependent) {
  Var x(Tensor({1}, 1.0), true);
  Var y = x.deep_copy();
  y.mutable_value()[0] = 5.0;
  EXPECT_EQ(x.value()[0], 1.0);
  EXPECT_TRUE(y.requires_grad());
}

}  // namespace
}  // namespace pq
