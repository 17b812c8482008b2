// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pq/tensor.hpp"

namespace pq {

/// Per-parameter SGD state. Classic (heavy-ball) momentum:
///   v <- momentum * v + (g + weight_decay * p)
///   p <- p - lr * v
struct SgdState {
  double lr = 0.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  Tensor velocity;
};

/// Applies one update in place. `state.velocity` is allocated on first use.
void sgd_step(Tensor& param, const Tensor& grad, SgdState& state);

struct EmaState {
  double decay = 0.9997;
  Tensor shadow;
};

/// Shadow starts as an exact copy of the parameter.
EmaState make_ema_state(const Tensor& param, double decay);

/// shadow <- decay * shadow + (1 - decay) * param
void ema_update(EmaState& state, const Tensor& param);

/// Linear warmup from 0 to base_lr over `warmup_steps`, then half-cosine decay
/// to 0 at `total_steps`.
double cosine_lr(std::size_t step, std::size_t total_steps,
                 std::size_t warmup_steps, double base_lr);

}  // namespace pq
