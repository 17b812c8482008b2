// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/negpad.hpp"

#include <algorithm>
#include <cmath>

namespace pq {

Tensor shift_decompose(const Tensor& a, double m) {
  Tensor out = a;
  for (double& v : out.vec()) v -= m;
  return out;
}

Tensor negpad_bias(const Tensor& weight, double m) {
  if (weight.rank() != 4) throw ShapeError("negpad_bias expects a 4-d conv weight");
  const std::size_t C = weight.dim(0);
  const std::size_t per = weight.numel() / C;
  Tensor bias({C});
  for (std::size_t o = 0; o < C; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += weight[o * per + i];
    bias[o] = m * s;
  }
  return bias;
}

Tensor negpad_conv(const Tensor& shifted, const Tensor& weight, const Tensor& bias,
                   const Conv2dOptions& opts) {
  Conv2dOptions zero = opts;
  zero.pad_value = 0.0;
  NoGradGuard guard;
  return conv2d(Var(shifted), Var(weight), Var(bias), zero).value();
}

NegPadRewrite NegPadRewrite::make(const Tensor& weight, double m, std::size_t stride,
                                  std::size_t pad, std::size_t groups) {
  NegPadRewrite r;
  r.shift_m = m;
  r.weight = weight;
  r.bias_c = negpad_bias(weight, m);
  r.conv = Conv2dOptions{stride, pad, groups, m};
  return r;
}

Tensor NegPadRewrite::original(const Tensor& a) const {
  NoGradGuard guard;
  return conv2d(Var(a), Var(weight), std::nullopt, conv).value();
}

Tensor NegPadRewrite::rewritten(const Tensor& a) const {
  return negpad_conv(shift_decompose(a, shift_m), weight, bias_c, conv);
}

namespace {

double max_abs_diff(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) throw ShapeError("negpad outputs differ in shape");
  double e = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) e = std::max(e, std::abs(x[i] - y[i]));
  return e;
}

}  // namespace

double verify_rewrite(const NegPadRewrite& rewrite, const Shape& input_shape,
                      std::size_t trials, Rng& rng,
                      const std::optional<QuantParams>& act_quant) {
  if (trials == 0) throw Error("verify_rewrite needs at least one trial");
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Tensor a(input_shape);
    for (double& v : a.vec()) v = h_swish_value(3.0 * rng.normal());
    if (act_quant) a = duq_forward(a, *act_quant);
    worst = std::max(worst, max_abs_diff(rewrite.original(a), rewrite.rewritten(a)));
  }
  return worst;
}

std::vector<NegPadLayerReport> verify_network(const Network& net, const Dataset& data,
                                              std::size_t trials, std::uint64_t seed) {
  Network probe = net;
  ForwardTrace trace;
  {
    NoGradGuard guard;
    probe.forward(data.images, false, &trace);
  }
  Rng rng(seed);
  std::vector<NegPadLayerReport> out;
  for (const Layer& L : probe.layers()) {
    if (!L.is_conv() || L.pad == 0 || L.pad_value == 0.0) continue;
    const Tensor& input = trace.inputs[L.id];
    const Tensor& weight = trace.weights[L.id];
    const NegPadRewrite rw = NegPadRewrite::make(weight, L.pad_value, L.spec.stride, L.pad,
                                                 L.groups);
    NegPadLayerReport r;
    r.layer_id = L.id;
    r.layer_name = L.name;
    r.shift_m = L.pad_value;
    r.max_abs_error = max_abs_diff(rw.original(input), rw.rewritten(input));
    if (trials > 0) {
      Shape shape = input.shape();
      shape[0] = 2;
      std::optional<QuantParams> q;
      if (L.input_q.enabled() && L.input_q.kind() == QuantKind::duq) q = L.input_q.params();
      r.max_abs_error = std::max(r.max_abs_error, verify_rewrite(rw, shape, trials, rng, q));
    }
    const Tensor shifted = shift_decompose(input, L.pad_value);
    std::size_t zeros = 0;
    for (double v : shifted.data()) zeros += v == 0.0 ? 1 : 0;
    r.zero_fraction = static_cast<double>(zeros) / static_cast<double>(shifted.numel());
    out.push_back(r);
  }
  return out;
}

void write_negpad_csv(const std::vector<NegPadLayerReport>& rows, std::ostream& out) {
  out << "layer_id,layer_name,max_abs_error,zero_fraction\n";
  const auto old = out.precision(6);
  for (const auto& r : rows) {
    out << r.layer_id << ',' << r.layer_name << ',' << std::scientific << r.max_abs_error
        << std::defaultfloat << ',' << r.zero_fraction << '\n';
  }
  out.precision(old);
}

}  // namespace pq
