// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/quant.hpp"

#include <algorithm>
#include <cmath>

namespace pq {

namespace {

constexpr double kMinRange = 1e-8;

double level_index(double x_hat, int n_lv) {
  return std::round(static_cast<double>(n_lv - 1) * x_hat);
}

Var scalar_var(double v, bool trainable) { return Var(Tensor::scalar(v), trainable); }

}  // namespace

std::string to_string(QuantMode m) {
  switch (m) {
    case QuantMode::asymmetric: return "asymmetric";
    case QuantMode::symmetric: return "symmetric";
    case QuantMode::non_negative: return "non_negative";
  }
  return "?";
}

QuantMode parse_quant_mode(const std::string& s) {
  if (s == "asymmetric") return QuantMode::asymmetric;
  if (s == "symmetric") return QuantMode::symmetric;
  if (s == "non_negative") return QuantMode::non_negative;
  throw Error("unknown quantizer mode '" + s + "'");
}

std::string to_string(QuantKind k) { return k == QuantKind::duq ? "duq" : "pact"; }

QuantKind parse_quant_kind(const std::string& s) {
  if (s == "duq") return QuantKind::duq;
  if (s == "pact") return QuantKind::pact;
  throw Error("unknown quantizer kind '" + s + "'");
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large |x|.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_grad(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw Error("inverse_softplus requires y > 0");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

double QuantParams::effective_b() const {
  return mode == QuantMode::symmetric ? -0.5 * a_prime() : b;
}

double QuantParams::effective_beta() const {
  switch (mode) {
    case QuantMode::symmetric: return -0.5 * alpha_prime();
    case QuantMode::non_negative: return 0.0;
    case QuantMode::asymmetric: break;
  }
  return beta;
}

int checked_bit_width(double bits) {
  if (!(bits >= 2.0 && bits <= 8.0) || bits != std::floor(bits)) {
    throw Error("bit width must be an integer in [2,8], got " + std::to_string(bits));
  }
  return static_cast<int>(bits);
}

int weight_levels(int bits) { return (1 << checked_bit_width(bits)) - 1; }

int activation_levels(int bits, QuantMode mode) {
  const int n = 1 << checked_bit_width(bits);
  return mode == QuantMode::symmetric ? n - 1 : n;
}

Tensor duq_forward(const Tensor& x, const QuantParams& q) {
  if (q.n_lv < 2) throw Error("DuQ requires n_lv >= 2");
  const double ap = q.a_prime(), alp = q.alpha_prime();
  const double b = q.effective_b(), beta = q.effective_beta();
  const double steps = static_cast<double>(q.n_lv - 1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double s = std::clamp((x[i] - b) / ap, 0.0, 1.0);
    out[i] = alp * (level_index(s, q.n_lv) / steps) + beta;
  }
  return out;
}

DuqGrads duq_backward(const Tensor& x, const QuantParams& q,
                      const Tensor& upstream) {
  if (!x.same_shape(upstream)) throw ShapeError("duq_backward shape mismatch");
  const double ap = q.a_prime(), alp = q.alpha_prime();
  const double b = q.effective_b();
  const double steps = static_cast<double>(q.n_lv - 1);
  DuqGrads g;
  g.x = Tensor(x.shape(), 0.0);
  // Gradients with respect to a', b_eff, alpha', beta_eff.
  double g_ap = 0.0, g_b = 0.0, g_alp = 0.0, g_beta = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double up = upstream[i];
    const double s = (x[i] - b) / ap;
    const double x_bar = level_index(std::clamp(s, 0.0, 1.0), q.n_lv) / steps;
    g_beta += up;
    g_alp += up * x_bar;
    if (s > 0.0 && s < 1.0) {
      // out = alpha' * s + beta under straight-through rounding.
      const double d = up * alp / ap;
      g.x[i] = d;
      g_b -= d;
      g_ap -= d * s;
    }
  }
  const double sa = softplus_grad(q.a), sal = softplus_grad(q.alpha);
  switch (q.mode) {
    case QuantMode::asymmetric:
      g.a = g_ap * sa;
      g.b = g_b;
      g.alpha = g_alp * sal;
      g.beta = g_beta;
      break;
    case QuantMode::symmetric:
      g.a = (g_ap - 0.5 * g_b) * sa;
      g.alpha = (g_alp - 0.5 * g_beta) * sal;
      break;
    case QuantMode::non_negative:
      g.a = g_ap * sa;
      g.b = g_b;
      g.alpha = g_alp * sal;
      break;
  }
  return g;
}

Tensor pact_forward(const Tensor& x, const PactParams& p) {
  if (!(p.p > 0.0)) throw Error("PACT clipping threshold must be > 0");
  if (p.n_lv < 2) throw Error("PACT requires n_lv >= 2");
  const double steps = static_cast<double>(p.n_lv - 1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double y = std::clamp(x[i], 0.0, p.p);
    out[i] = p.p * (std::round(y / p.p * steps) / steps);
  }
  return out;
}

PactGrads pact_backward(const Tensor& x, const PactParams& p,
                        const Tensor& upstream) {
  if (!x.same_shape(upstream)) throw ShapeError("pact_backward shape mismatch");
  PactGrads g;
  g.x = Tensor(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (x[i] >= p.p) {
      g.p += upstream[i];
    } else if (x[i] >= 0.0) {
      g.x[i] = upstream[i];
    }
  }
  return g;
}

QuantParams make_weight_quantizer(int bits, const Tensor& weight) {
  QuantParams q;
  q.mode = QuantMode::symmetric;
  q.n_lv = weight_levels(bits);
  double mean = 0.0;
  for (double v : weight.data()) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(weight.numel(), 1));
  double var = 0.0;
  for (double v : weight.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(std::max<std::size_t>(weight.numel(), 1));
  const double range = std::max(6.0 * std::sqrt(var), kMinRange);
  q.a = inverse_softplus(range);
  q.alpha = q.a;
  q.b = -0.5 * range;
  q.beta = -0.5 * range;
  return q;
}

QuantParams make_activation_quantizer(int bits, const Tensor& calibration,
                                      QuantMode mode) {
  if (calibration.empty()) throw Error("activation calibration batch is empty");
  QuantParams q;
  q.mode = mode;
  q.n_lv = activation_levels(bits, mode);
  const auto [lo_it, hi_it] =
      std::minmax_element(calibration.data().begin(), calibration.data().end());
  double lo = *lo_it, hi = *hi_it;
  switch (mode) {
    case QuantMode::asymmetric: break;
    case QuantMode::non_negative: lo = 0.0; break;
    case QuantMode::symmetric: {
      const double m = std::max(std::abs(lo), std::abs(hi));
      lo = -m;
      hi = m;
      break;
    }
  }
  const double range = std::max(hi - lo, kMinRange);
  q.a = inverse_softplus(range);
  q.alpha = q.a;
  q.b = lo;
  q.beta = mode == QuantMode::non_negative ? 0.0 : lo;
  return q;
}

Var duq(const Var& x, const Var& a, const Var& b, const Var& alpha,
        const Var& beta, int n_lv, QuantMode mode) {
  QuantParams q{a.value().item(), b.value().item(), alpha.value().item(),
                beta.value().item(), n_lv, mode};
  Tensor out = duq_forward(x.value(), q);
  check_finite(out, "duq");
  return Var::make(std::move(out), {x, a, b, alpha, beta}, [q](Node& self) {
    const DuqGrads g = duq_backward(self.parents[0]->value, q, self.grad);
    Node& px = *self.parents[0];
    if (px.requires_grad) {
      Tensor& gx = px.grad_buffer();
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g.x[i];
    }
    const double pg[4] = {g.a, g.b, g.alpha, g.beta};
    for (int k = 0; k < 4; ++k) {
      Node& p = *self.parents[1 + k];
      if (p.requires_grad) p.grad_buffer()[0] += pg[k];
    }
  });
}

Var pact(const Var& x, const Var& p, int n_lv) {
  const PactParams pp{p.value().item(), n_lv};
  Tensor out = pact_forward(x.value(), pp);
  return Var::make(std::move(out), {x, p}, [pp](Node& self) {
    const PactGrads g = pact_backward(self.parents[0]->value, pp, self.grad);
    Node& px = *self.parents[0];
    if (px.requires_grad) {
      Tensor& gx = px.grad_buffer();
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g.x[i];
    }
    Node& pn = *self.parents[1];
    if (pn.requires_grad) pn.grad_buffer()[0] += g.p;
  });
}

Quantizer::Quantizer(QuantRole role, QuantKind kind, QuantMode mode)
    : role_(role), kind_(kind), mode_(mode) {
  if (role == QuantRole::weight && kind == QuantKind::pact) {
    throw Error("PACT is an activation quantizer");
  }
  a_ = scalar_var(0.0, true);
  b_ = scalar_var(0.0, mode == QuantMode::asymmetric || mode == QuantMode::non_negative);
  alpha_ = scalar_var(0.0, true);
  beta_ = scalar_var(0.0, mode == QuantMode::asymmetric);
  p_ = scalar_var(1.0, true);
}

void Quantizer::set_learned(bool learned) {
  if (!learned && role_ != QuantRole::weight) {
    throw Error("only weight quantizers can derive their range from statistics");
  }
  learned_ = learned;
}

void Quantizer::pin_beta(double value) {
  if (mode_ != QuantMode::asymmetric) {
    throw Error("beta can only be pinned on an asymmetric quantizer");
  }
  beta_pinned_ = true;
  beta_.mutable_value()[0] = value;
  beta_.set_requires_grad(false);
}

void Quantizer::set_bits(int bits) {
  if (bits == 0) {
    bits_ = 0;
    n_lv_ = 0;
    return;
  }
  checked_bit_width(bits);
  bits_ = bits;
  n_lv_ = role_ == QuantRole::weight ? weight_levels(bits) : activation_levels(bits, mode_);
}

void Quantizer::set_levels(int n_lv) {
  if (n_lv != 0 && n_lv < 2) throw Error("quantizer needs at least 2 levels");
  n_lv_ = n_lv;
  bits_ = 0;
  while (n_lv > 0 && (1 << bits_) < n_lv) ++bits_;
}

void Quantizer::calibrate(const Tensor& sample) {
  if (kind_ == QuantKind::pact) {
    double hi = 0.0;
    for (double v : sample.data()) hi = std::max(hi, v);
    p_.mutable_value()[0] = hi > 0.0 ? hi : 1.0;
    calibrated_ = true;
    return;
  }
  // Calibration only sets the range; the level count is kept as configured.
  QuantParams q = role_ == QuantRole::weight ? make_weight_quantizer(2, sample)
                                             : make_activation_quantizer(2, sample, mode_);
  q.n_lv = n_lv_;
  if (role_ == QuantRole::weight && mode_ != QuantMode::symmetric) {
    // Weight ranges are always initialized symmetric; re-express in this mode.
    q.mode = mode_;
    q.b = -0.5 * softplus(q.a);
    q.beta = mode_ == QuantMode::non_negative ? 0.0 : q.b;
  }
  a_.mutable_value()[0] = q.a;
  b_.mutable_value()[0] = q.b;
  alpha_.mutable_value()[0] = q.alpha;
  if (beta_pinned_) {
    // Keep the bottom level; widen alpha so the top level still covers the max.
    const double top = softplus(q.alpha) + q.beta;
    const double pinned = beta_.value()[0];
    alpha_.mutable_value()[0] = inverse_softplus(std::max(top - pinned, kMinRange));
    b_.mutable_value()[0] = std::min(q.b, pinned);
    a_.mutable_value()[0] =
        inverse_softplus(std::max(top - b_.value()[0], kMinRange));
  } else {
    beta_.mutable_value()[0] = q.beta;
  }
  calibrated_ = true;
}

Var Quantizer::apply(const Var& x) {
  if (!enabled()) return x;
  if (role_ == QuantRole::weight && !learned_) {
    calibrate(x.value());
    return duq(x, a_.detach(), b_.detach(), alpha_.detach(), beta_.detach(), n_lv_, mode_);
  }
  if (!calibrated_) calibrate(x.value());
  if (kind_ == QuantKind::pact) return pact(x, p_, n_lv_);
  return duq(x, a_, b_, alpha_, beta_, n_lv_, mode_);
}

QuantParams Quantizer::params() const {
  return QuantParams{a_.value()[0], b_.value()[0], alpha_.value()[0],
                     beta_.value()[0], n_lv_, mode_};
}

void Quantizer::set_params(const QuantParams& q) {
  a_.mutable_value()[0] = q.a;
  b_.mutable_value()[0] = q.b;
  alpha_.mutable_value()[0] = q.alpha;
  beta_.mutable_value()[0] = q.beta;
  n_lv_ = q.n_lv;
  calibrated_ = true;
}

PactParams Quantizer::pact_params() const { return PactParams{p_.value()[0], n_lv_}; }

std::vector<Var> Quantizer::trainable() const {
  std::vector<Var> out;
  if (!enabled()) return out;
  if (kind_ == QuantKind::pact) {
    out.push_back(p_);
    return out;
  }
  if (role_ == QuantRole::weight && !learned_) return out;
  for (const Var& v : {a_, b_, alpha_, beta_}) {
    if (v.requires_grad()) out.push_back(v);
  }
  return out;
}

std::vector<std::pair<std::string, Var>> Quantizer::state() const {
  return {{"a", a_}, {"b", b_}, {"alpha", alpha_}, {"beta", beta_}, {"p", p_}};
}

Quantizer::Quantizer(const Quantizer& o)
    : role_(o.role_),
      kind_(o.kind_),
      mode_(o.mode_),
      bits_(o.bits_),
      n_lv_(o.n_lv_),
      calibrated_(o.calibrated_),
      learned_(o.learned_),
      beta_pinned_(o.beta_pinned_),
      a_(o.a_.deep_copy()),
      b_(o.b_.deep_copy()),
      alpha_(o.alpha_.deep_copy()),
      beta_(o.beta_.deep_copy()),
      p_(o.p_.deep_copy()) {}

Quantizer& Quantizer::operator=(const Quantizer& o) {
  if (this != &o) *this = Quantizer(o);
  return *this;
}

}  // namespace pq
