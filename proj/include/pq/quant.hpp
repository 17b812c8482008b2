// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Learnable fake quantization.
//
// DuQ maps x through an affine pre-transform, clip, uniform rounding and an
// affine post-transform:
//
//   s     = (x - b) / a'              a'     = softplus(a)
//   x_hat = clip(s, 0, 1)
//   x_bar = round((n_lv - 1) * x_hat) / (n_lv - 1)
//   out   = alpha' * x_bar + beta     alpha' = softplus(alpha)
//
// so outputs lie on {alpha' * k / (n_lv - 1) + beta : k = 0..n_lv-1}. Rounding
// is half-away-from-zero and the backward pass treats it as identity.
//
// PACT clips to [0, p] and quantizes uniformly on that range; only the
// saturated region feeds the gradient of p.

#pragma once

#include <string>
#include <vector>

#include "pq/autograd.hpp"

namespace pq {

enum class QuantMode {
  asymmetric,    // a, b, alpha, beta all free
  symmetric,     // b = -a'/2, beta = -alpha'/2; zero-centred grid (odd n_lv)
  non_negative,  // beta = 0
};

enum class QuantKind { duq, pact };
enum class QuantRole { weight, activation };

std::string to_string(QuantMode m);
QuantMode parse_quant_mode(const std::string& s);
std::string to_string(QuantKind k);
QuantKind parse_quant_kind(const std::string& s);

double softplus(double x);
double softplus_grad(double x);  // logistic sigmoid
double inverse_softplus(double y);

struct QuantParams {
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int n_lv = 2;
  QuantMode mode = QuantMode::asymmetric;

  double a_prime() const { return softplus(a); }
  double alpha_prime() const { return softplus(alpha); }
  /// Offsets after applying the mode's tying rules.
  double effective_b() const;
  double effective_beta() const;
};

struct PactParams {
  double p = 6.0;
  int n_lv = 16;
};

/// Validated bit width in [2, 8]; rejects non-integral values.
int checked_bit_width(double bits);
/// 2^bit - 1: odd, so the symmetric grid contains zero.
int weight_levels(int bits);
/// 2^bit, or 2^bit - 1 for symmetric activation quantizers.
int activation_levels(int bits, QuantMode mode);

Tensor duq_forward(const Tensor& x, const QuantParams& q);

struct DuqGrads {
  Tensor x;
  double a = 0.0, b = 0.0, alpha = 0.0, beta = 0.0;
};

/// Straight-through gradients of sum(upstream * duq_forward(x, q)).
DuqGrads duq_backward(const Tensor& x, const QuantParams& q,
                      const Tensor& upstream);

Tensor pact_forward(const Tensor& x, const PactParams& p);

struct PactGrads {
  Tensor x;
  double p = 0.0;
};

PactGrads pact_backward(const Tensor& x, const PactParams& p,
                        const Tensor& upstream);

/// Symmetric weight quantizer with n_lv = 2^bit - 1 whose range covers
/// +-3 standard deviations of `weight`.
QuantParams make_weight_quantizer(int bits, const Tensor& weight);

/// Activation quantizer calibrated on one batch. Asymmetric mode spans
/// [min, max]; non-negative spans [0, max]; symmetric spans +-max|x|.
QuantParams make_activation_quantizer(int bits, const Tensor& calibration,
                                      QuantMode mode);

/// Autograd DuQ. Parameters are scalar Vars of shape [1].
Var duq(const Var& x, const Var& a, const Var& b, const Var& alpha,
        const Var& beta, int n_lv, QuantMode mode);

Var pact(const Var& x, const Var& p, int n_lv);

/// Stateful quantizer attached to a layer's weight or input.
class Quantizer {
 public:
  Quantizer() : Quantizer(QuantRole::activation, QuantKind::duq, QuantMode::asymmetric) {}
  Quantizer(QuantRole role, QuantKind kind, QuantMode mode);
  // Copies own independent parameter storage.
  Quantizer(const Quantizer& other);
  Quantizer& operator=(const Quantizer& other);
  Quantizer(Quantizer&&) = default;
  Quantizer& operator=(Quantizer&&) = default;

  QuantRole role() const { return role_; }
  QuantKind kind() const { return kind_; }
  QuantMode mode() const { return mode_; }
  int bits() const { return bits_; }
  int n_lv() const { return n_lv_; }
  bool enabled() const { return n_lv_ > 0; }
  bool calibrated() const { return calibrated_; }

  /// When false (weights only) the range is re-derived from the weight
  /// statistics on every call and receives no gradient.
  bool learned() const { return learned_; }
  void set_learned(bool learned);

  /// Pins the bottom output level (beta) to `value` and stops training it.
  void pin_beta(double value);
  bool beta_pinned() const { return beta_pinned_; }

  /// Sets the bit width (0 disables). Level count follows role and mode.
  void set_bits(int bits);
  /// Sets an explicit level count (0 disables), e.g. 2^16 for a
  /// near-continuous reference grid.
  void set_levels(int n_lv);
  /// Marks the quantizer uncalibrated so the next apply() re-initializes.
  void invalidate() { calibrated_ = false; }
  void mark_calibrated(bool c) { calibrated_ = c; }

  void calibrate(const Tensor& sample);
  Var apply(const Var& x);

  QuantParams params() const;
  void set_params(const QuantParams& q);
  PactParams pact_params() const;

  /// Scalar parameter Vars in a fixed order; only those that are trained.
  std::vector<Var> trainable() const;

  /// Named scalar state for checkpoints: a, b, alpha, beta, p.
  std::vector<std::pair<std::string, Var>> state() const;

 private:
  QuantRole role_ = QuantRole::activation;
  QuantKind kind_ = QuantKind::duq;
  QuantMode mode_ = QuantMode::asymmetric;
  int bits_ = 0;
  int n_lv_ = 0;
  bool calibrated_ = false;
  bool learned_ = true;
  bool beta_pinned_ = false;
  Var a_, b_, alpha_, beta_, p_;
};

}  // namespace pq
