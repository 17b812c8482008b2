// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pq {

void sgd_step(Tensor& param, const Tensor& grad, SgdState& state) {
  if (!param.same_shape(grad)) {
    throw ShapeError("sgd_step grad shape " + shape_str(grad.shape()) +
                     " != param shape " + shape_str(param.shape()));
  }
  if (state.velocity.empty()) state.velocity = Tensor(param.shape(), 0.0);
  if (!state.velocity.same_shape(param)) {
    throw ShapeError("sgd_step velocity shape does not match parameter");
  }
  const double m = state.momentum, wd = state.weight_decay, lr = state.lr;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = wd != 0.0 ? grad[i] + wd * param[i] : grad[i];
    state.velocity[i] = m * state.velocity[i] + g;
  }
  if (lr == 0.0) return;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    param[i] -= lr * state.velocity[i];
  }
}

EmaState make_ema_state(const Tensor& param, double decay) {
  if (!(decay > 0.0 && decay < 1.0)) {
    throw Error("ema decay must be in (0,1), got " + std::to_string(decay));
  }
  return EmaState{decay, param};
}

void ema_update(EmaState& state, const Tensor& param) {
  if (!state.shadow.same_shape(param)) {
    throw ShapeError("ema shadow shape does not match parameter");
  }
  const double d = state.decay;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    state.shadow[i] = d * state.shadow[i] + (1.0 - d) * param[i];
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps,
                 std::size_t warmup_steps, double base_lr) {
  if (warmup_steps >= total_steps && total_steps > 0) {
    throw Error("cosine_lr requires warmup_steps < total_steps");
  }
  if (step > total_steps) step = total_steps;
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps == 0) return 0.0;
  const double t = static_cast<double>(step - warmup_steps) /
                   static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace pq
