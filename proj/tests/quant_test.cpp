// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pq/ops.hpp"
#include "pq/quant.hpp"

namespace pq {
namespace {

QuantParams unit(int n_lv) {
  QuantParams q;
  q.a = inverse_softplus(1.0);
  q.alpha = inverse_softplus(1.0);
  q.n_lv = n_lv;
  return q;
}

double duq1(double x, const QuantParams& q) { return duq_forward(Tensor({1}, x), q)[0]; }

TEST(Duq, RoundsToNearestLevel) {
  EXPECT_NEAR(duq1(0.3, unit(5)), 0.25, 1e-15);
}

TEST(Duq, ClipEndpoints) {
  EXPECT_NEAR(duq1(2.0, unit(5)), 1.0, 1e-15);
  EXPECT_NEAR(duq1(-0.5, unit(5)), 0.0, 1e-15);
}

TEST(Duq, HalfwayRoundsAwayFromZero) {
  // (n_lv-1) * x_hat = 2.5 exactly.
  EXPECT_NEAR(duq1(0.625, unit(5)), 0.75, 1e-15);
}

TEST(Duq, HSwishShapedGridMatchesNearestLevelOracle) {
  QuantParams q;
  q.b = -0.375;
  q.beta = -0.375;
  q.a = inverse_softplus(3.375);
  q.alpha = inverse_softplus(3.375);
  q.n_lv = 16;
  Rng rng(11);
  Tensor x({10000});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-5.0, 5.0);
  const Tensor y = duq_forward(x, q);
  double lo = 1e9, hi = -1e9;
  const double step = 3.375 / 15.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(y[i], oracle::duq_nearest_level(x[i], q), 1e-12) << x[i];
    const double k = (y[i] + 0.375) / step;
    EXPECT_NEAR(k, std::round(k), 1e-9);
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  EXPECT_NEAR(lo, -0.375, 1e-12);
  EXPECT_NEAR(hi, 3.0, 1e-12);
}

TEST(Duq, RejectsFewerThanTwoLevels) {
  EXPECT_THROW(duq_forward(Tensor({1}), unit(1)), Error);
}

class DuqProperties : public ::testing::TestWithParam<QuantMode> {};

QuantParams random_params(Rng& rng, QuantMode mode) {
  QuantParams q;
  q.a = rng.uniform(-1.0, 2.0);
  q.b = rng.uniform(-1.0, 0.5);
  q.alpha = rng.uniform(-1.0, 2.0);
  q.beta = rng.uniform(-1.0, 1.0);
  q.mode = mode;
  q.n_lv = 2 + static_cast<int>(rng.below(30));
  if (mode == QuantMode::symmetric && q.n_lv % 2 == 0) ++q.n_lv;
  return q;
}

TEST_P(DuqProperties, LevelCountMonotonicityAndGridAffinity) {
  Rng rng(static_cast<std::uint64_t>(GetParam()) + 21);
  for (int trial = 0; trial < 50; ++trial) {
    const QuantParams q = random_params(rng, GetParam());
    Tensor x({500});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-4.0, 4.0);
    std::sort(x.data().begin(), x.data().end());
    const Tensor y = duq_forward(x, q);
    std::set<double> distinct(y.data().begin(), y.data().end());
    EXPECT_LE(distinct.size(), static_cast<std::size_t>(q.n_lv));
    const double scale = q.alpha_prime() / (q.n_lv - 1);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      if (i > 0) EXPECT_LE(y[i - 1], y[i]);
      const double k = (y[i] - q.effective_beta()) / scale;
      EXPECT_NEAR(k, std::round(k), 1e-9);
      EXPECT_GE(std::round(k), 0.0);
      EXPECT_LE(std::round(k), q.n_lv - 1);
    }
  }
}

TEST_P(DuqProperties, GradientCoverageByRegion) {
  Rng rng(static_cast<std::uint64_t>(GetParam()) + 31);
  const QuantParams q = random_params(rng, GetParam());
  const double b = q.effective_b(), ap = q.a_prime();
  const double below = b - 1.0, inside = b + 0.37 * ap, above = b + ap + 1.0;
  auto grads = [&](double x) {
    return duq_backward(Tensor({1}, x), q, Tensor({1}, 1.0));
  };
  const DuqGrads lo = grads(below), mid = grads(inside), hi = grads(above);
  EXPECT_EQ(lo.x[0], 0.0);
  EXPECT_EQ(hi.x[0], 0.0);
  EXPECT_NE(mid.x[0], 0.0);
  switch (GetParam()) {
    case QuantMode::asymmetric:
      EXPECT_EQ(lo.beta, 1.0);
      EXPECT_EQ(lo.a, 0.0);
      EXPECT_EQ(lo.b, 0.0);
      EXPECT_EQ(lo.alpha, 0.0);
      EXPECT_NE(mid.a, 0.0);
      EXPECT_NE(mid.b, 0.0);
      EXPECT_NE(mid.alpha, 0.0);
      EXPECT_EQ(mid.beta, 1.0);
      EXPECT_EQ(hi.beta, 1.0);
      EXPECT_DOUBLE_EQ(hi.alpha, softplus_grad(q.alpha));
      break;
    case QuantMode::non_negative:
      // beta is fixed at zero, so the low region carries no gradient at all.
      EXPECT_EQ(lo.a + lo.b + lo.alpha + lo.beta, 0.0);
      EXPECT_NE(mid.a, 0.0);
      EXPECT_DOUBLE_EQ(hi.alpha, softplus_grad(q.alpha));
      break;
    case QuantMode::symmetric:
      // beta = -alpha'/2: the low region feeds alpha through the tie.
      EXPECT_DOUBLE_EQ(lo.alpha, -0.5 * softplus_grad(q.alpha));
      EXPECT_DOUBLE_EQ(hi.alpha, 0.5 * softplus_grad(q.alpha));
      EXPECT_NE(mid.a, 0.0);
      break;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, DuqProperties,
                         ::testing::Values(QuantMode::asymmetric, QuantMode::symmetric,
                                           QuantMode::non_negative),
                         [](const auto& info) { return to_string(info.param); });

TEST(Duq, AutogradMatchesDirectBackward) {
  Rng rng(41);
  QuantParams q = random_params(rng, QuantMode::asymmetric);
  const Tensor x = oracle::random_tensor({20}, rng, 2.0);
  const Tensor up = oracle::random_tensor({20}, rng);
  Var vx(x, true), va(Tensor::scalar(q.a), true), vb(Tensor::scalar(q.b), true),
      val(Tensor::scalar(q.alpha), true), vbe(Tensor::scalar(q.beta), true);
  Var y = duq(vx, va, vb, val, vbe, q.n_lv, q.mode);
  Var loss = weighted_sum(y, up);
  backward(loss);
  const DuqGrads g = duq_backward(x, q, up);
  EXPECT_TRUE(vx.grad().bitwise_equal(g.x));
  EXPECT_EQ(va.grad()[0], g.a);
  EXPECT_EQ(vb.grad()[0], g.b);
  EXPECT_EQ(val.grad()[0], g.alpha);
  EXPECT_EQ(vbe.grad()[0], g.beta);
}

TEST(Pact, Examples) {
  const PactParams p{6.0, 4};
  const Tensor y = pact_forward(Tensor({4}, std::vector<double>{-1.0, 0.0, 6.0, 2.5}), p);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 6.0);
  EXPECT_EQ(y[3], 2.0);
  EXPECT_EQ(pact_forward(Tensor({1}, 9.0), p)[0], 6.0);
}

TEST(Pact, NearestLevelOracle) {
  Rng rng(51);
  const PactParams p{2.7, 8};
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-1.0, 4.0);
    const double y = pact_forward(Tensor({1}, x), p)[0];
    double best = 0.0, dist = 1e9;
    for (int k = 0; k < 8; ++k) {
      const double lv = p.p * k / 7.0;
      const double d = std::abs(std::clamp(x, 0.0, p.p) - lv);
      if (d < dist - 1e-15) {
        dist = d;
        best = lv;
      }
    }
    EXPECT_NEAR(y, best, 1e-12) << x;
  }
}

TEST(Pact, GradientOfThresholdIsSupportedOnSaturatedInputs) {
  Rng rng(52);
  const PactParams p{1.5, 16};
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(-2.0, 3.0);
    const PactGrads g = pact_backward(Tensor({1}, x), p, Tensor({1}, 1.0));
    EXPECT_EQ(g.p, x >= p.p ? 1.0 : 0.0) << x;
    EXPECT_EQ(g.x[0], (x >= 0.0 && x < p.p) ? 1.0 : 0.0) << x;
  }
}

TEST(Pact, RejectsNonPositiveThreshold) {
  EXPECT_THROW(pact_forward(Tensor({1}), PactParams{0.0, 4}), Error);
  EXPECT_THROW(pact_forward(Tensor({1}), PactParams{1.0, 1}), Error);
}

TEST(BitWidths, LevelCounts) {
  EXPECT_EQ(weight_levels(8), 255);
  EXPECT_EQ(weight_levels(3), 7);
  EXPECT_EQ(weight_levels(2), 3);
  EXPECT_EQ(activation_levels(8, QuantMode::asymmetric), 256);
  EXPECT_EQ(activation_levels(4, QuantMode::symmetric), 15);
  EXPECT_THROW(checked_bit_width(2.32), Error);
  EXPECT_THROW(checked_bit_width(1), Error);
  EXPECT_THROW(checked_bit_width(9), Error);
  EXPECT_THROW(weight_levels(1), Error);
}

TEST(WeightQuantizer, FourBitRandomWeightsGiveSymmetricGridWithZero) {
  Rng rng(61);
  const Tensor w = oracle::random_tensor({8, 4, 3, 3}, rng, 0.1);
  const QuantParams q = make_weight_quantizer(4, w);
  EXPECT_EQ(q.n_lv, 15);
  EXPECT_EQ(q.mode, QuantMode::symmetric);
  const Tensor y = duq_forward(w, q);
  std::set<double> distinct(y.data().begin(), y.data().end());
  EXPECT_LE(distinct.size(), 15u);
  const double step = q.alpha_prime() / 14.0;
  bool has_zero = false;
  for (double v : distinct) {
    const double k = v / step;
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_LE(std::abs(std::round(k)), 7.0);
    if (std::abs(v) < 1e-12) has_zero = true;
  }
  EXPECT_TRUE(has_zero);
}

TEST(WeightQuantizer, GridPointsAreFixed) {
  Rng rng(62);
  const QuantParams q = make_weight_quantizer(3, oracle::random_tensor({50}, rng));
  const double step = q.alpha_prime() / 6.0;
  Tensor w({7});
  for (int k = 0; k < 7; ++k) w[k] = (k - 3) * step;
  const Tensor y = duq_forward(w, q);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(y[k], w[k], 1e-14);
}

TEST(WeightQuantizer, RangeCoversThreeStandardDeviations) {
  const Tensor w({4}, std::vector<double>{-1.0, 1.0, -1.0, 1.0});
  const QuantParams q = make_weight_quantizer(8, w);
  EXPECT_NEAR(q.a_prime(), 6.0, 1e-12);
  EXPECT_NEAR(q.effective_b(), -3.0, 1e-12);
}

TEST(ActivationQuantizer, CalibrationSpansBatch) {
  const Tensor x({4}, std::vector<double>{-0.2, 1.0, 3.0, 0.5});
  const QuantParams q = make_activation_quantizer(8, x, QuantMode::asymmetric);
  EXPECT_EQ(q.n_lv, 256);
  EXPECT_NEAR(q.b, -0.2, 1e-15);
  EXPECT_NEAR(q.a_prime(), 3.2, 1e-12);
  const Tensor y = duq_forward(x, q);
  EXPECT_NEAR(y[0], -0.2, 1e-12);
  EXPECT_NEAR(y[2], 3.0, 1e-12);
  EXPECT_THROW(make_activation_quantizer(8, Tensor(), QuantMode::asymmetric), Error);
}

TEST(Quantizer, CopiesOwnParameters) {
  Quantizer q(QuantRole::activation, QuantKind::duq, QuantMode::asymmetric);
  q.set_bits(4);
  q.calibrate(Tensor({3}, std::vector<double>{0.0, 1.0, 2.0}));
  Quantizer c = q;
  QuantParams p = c.params();
  p.b = 5.0;
  c.set_params(p);
  EXPECT_NE(q.params().b, 5.0);
}

TEST(Quantizer, PinnedBetaSurvivesCalibration) {
  Quantizer q(QuantRole::activation, QuantKind::duq, QuantMode::asymmetric);
  q.set_bits(4);
  q.pin_beta(-0.375);
  q.calibrate(Tensor({3}, std::vector<double>{-0.2, 1.0, 2.5}));
  const QuantParams p = q.params();
  EXPECT_EQ(p.beta, -0.375);
  EXPECT_NEAR(p.alpha_prime() + p.beta, 2.5, 1e-12);
  for (const Var& v : q.trainable()) EXPECT_NE(v.node(), q.state()[3].second.node());
}

TEST(Quantizer, RejectsInvalidConfigurations) {
  EXPECT_THROW(Quantizer(QuantRole::weight, QuantKind::pact, QuantMode::asymmetric), Error);
  Quantizer s(QuantRole::activation, QuantKind::duq, QuantMode::symmetric);
  EXPECT_THROW(s.pin_beta(-0.375), Error);
  Quantizer a(QuantRole::activation, QuantKind::duq, QuantMode::asymmetric);
  EXPECT_THROW(a.set_learned(false), Error);
  EXPECT_THROW(a.set_levels(1), Error);
}

TEST(Quantizer, DisabledIsIdentity) {
  Quantizer q;
  const Var x(Tensor({2}, std::vector<double>{0.123, -4.5}));
  EXPECT_EQ(q.apply(x).node(), x.node());
}

}  // namespace
}  // namespace pq
