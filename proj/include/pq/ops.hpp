// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>

#include "pq/autograd.hpp"

namespace pq {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t groups = 1;
  /// Value written into padded border positions. 0 gives zero padding.
  double pad_value = 0.0;
};

/// Cross-correlation of input [N,Cin,H,W] with weight [Cout,Cin/groups,kh,kw].
Var conv2d(const Var& input, const Var& weight, const std::optional<Var>& bias,
           const Conv2dOptions& opts = {});

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t pad);

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
  bool training = true;
  /// When false in training mode, batch statistics are used but the running
  /// estimates are left untouched.
  bool update_running = true;
};

/// Per-channel normalization of [N,C,H,W] (or [N,C]). In training mode the
/// running statistics are updated as run <- (1-m)*run + m*batch using the
/// population batch variance.
Var batch_norm(const Var& input, const Var& gamma, const Var& beta,
               Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opts);

Var relu(const Var& x);
Var relu6(const Var& x);
Var h_swish(const Var& x);

double h_swish_value(double x);
/// Global minimum of h-swish, attained at x = -1.5.
inline constexpr double kHSwishMin = -0.375;

/// x [N,in] times weight [out,in] transposed, plus optional bias [out].
Var dense(const Var& x, const Var& weight, const std::optional<Var>& bias);

/// [N,C,H,W] -> [N,C]
Var global_avg_pool(const Var& x);

Var reshape(const Var& x, Shape shape);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);

/// Scalar sum(x * w) for a constant weight tensor of the same shape.
Var weighted_sum(const Var& x, const Tensor& w);

/// Batch-mean cross entropy of softmax(logits [N,K]) against integer labels.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);

/// Distillation loss:
///   weight * T^2 * CE(softmax(teacher/T), softmax(student/T))
///   + (1 - weight) * CE(labels, student)
/// averaged over the batch. Teacher logits are constants.
Var kd_loss(const Var& student_logits, const Tensor& teacher_logits,
            std::span<const int> labels, double temperature, double weight);

Tensor softmax_rows(const Tensor& logits, double temperature = 1.0);

}  // namespace pq
