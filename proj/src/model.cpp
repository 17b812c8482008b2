// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/model.hpp"

#include <cmath>

#include "pq/random.hpp"

namespace pq {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "depthwise") return LayerKind::depthwise;
  if (s == "dense") return LayerKind::dense;
  throw Error("unknown layer type '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::relu6: return "relu6";
    case Activation::h_swish: return "h_swish";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "none") return Activation::none;
  if (s == "relu") return Activation::relu;
  if (s == "relu6") return Activation::relu6;
  if (s == "h_swish") return Activation::h_swish;
  throw Error("unknown activation '" + s + "'");
}

std::optional<double> activation_minimum(Activation a) {
  switch (a) {
    case Activation::relu:
    case Activation::relu6: return 0.0;
    case Activation::h_swish: return kHSwishMin;
    case Activation::none: break;
  }
  return std::nullopt;
}

Layer::Layer(const Layer& o)
    : id(o.id),
      name(o.name),
      spec(o.spec),
      in_channels(o.in_channels),
      in_h(o.in_h),
      in_w(o.in_w),
      out_channels(o.out_channels),
      out_h(o.out_h),
      out_w(o.out_w),
      groups(o.groups),
      pad(o.pad),
      pad_value(o.pad_value),
      input_activation(o.input_activation),
      weight(o.weight.deep_copy()),
      bias(o.bias ? std::optional<Var>(o.bias->deep_copy()) : std::nullopt),
      bn_gamma(o.bn_gamma.deep_copy()),
      bn_beta(o.bn_beta.deep_copy()),
      running_mean(o.running_mean),
      running_var(o.running_var),
      weight_q(o.weight_q),
      input_q(o.input_q),
      input_quantizable(o.input_quantizable) {}

Layer& Layer::operator=(const Layer& o) {
  if (this != &o) *this = Layer(o);
  return *this;
}

std::size_t Layer::macs() const {
  if (!is_conv()) return in_channels * out_channels;
  return out_h * out_w * out_channels * (in_channels / groups) * spec.kernel *
         spec.kernel;
}

void NetConfig::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  if (in_channels == 0 || in_height == 0 || in_width == 0) {
    throw ShapeError("input shape must be positive");
  }
  std::size_t c = in_channels, h = in_height, w = in_width;
  bool flat = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (s.kind == LayerKind::dense) {
      if (s.out_channels == 0) throw ShapeError(where + "dense needs out_channels");
      flat = true;
      c = s.out_channels;
      h = w = 1;
      continue;
    }
    if (flat) throw ShapeError(where + "conv layer after dense layer");
    if (s.kernel == 0 || s.stride == 0) throw ShapeError(where + "kernel and stride must be >= 1");
    if (s.kind == LayerKind::conv && s.out_channels == 0) {
      throw ShapeError(where + "conv needs out_channels");
    }
    const std::size_t pad = s.kernel / 2;
    h = conv_out_extent(h, s.kernel, s.stride, pad);
    w = conv_out_extent(w, s.kernel, s.stride, pad);
    if (s.kind == LayerKind::conv) c = s.out_channels;
  }
  if (layers.back().kind != LayerKind::dense) {
    throw ShapeError("last layer must be dense");
  }
  if (c != num_classes) {
    throw ShapeError("last layer width " + std::to_string(c) +
                     " does not match num_classes " + std::to_string(num_classes));
  }
}

NetConfig micro_mobilenet(const MicroMobileNetOptions& o) {
  if (o.block_widths.size() != o.block_strides.size()) {
    throw Error("micro_mobilenet: block_widths and block_strides differ in length");
  }
  NetConfig cfg;
  cfg.in_channels = o.in_channels;
  cfg.in_height = cfg.in_width = o.in_size;
  cfg.num_classes = o.num_classes;
  const std::size_t m = std::max<std::size_t>(o.width_mult, 1);
  cfg.layers.push_back({LayerKind::conv, o.stem_width * m, 3, 1, o.activation, true});
  for (std::size_t i = 0; i < o.block_widths.size(); ++i) {
    cfg.layers.push_back({LayerKind::depthwise, 0, 3, o.block_strides[i], o.activation, true});
    cfg.layers.push_back({LayerKind::conv, o.block_widths[i] * m, 1, 1, o.activation, true});
  }
  cfg.layers.push_back({LayerKind::dense, o.num_classes, 1, 1, Activation::none, true});
  cfg.validate();
  return cfg;
}

Network::Network(NetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t c = config_.in_channels, h = config_.in_height, w = config_.in_width;
  Activation prev_act = Activation::none;
  const char* tags[] = {"conv", "dw", "fc"};
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const LayerSpec& s = config_.layers[i];
    Layer L;
    L.id = i;
    L.spec = s;
    L.name = "L" + std::to_string(i) + "." + tags[static_cast<int>(s.kind)];
    L.input_activation = prev_act;
    L.input_quantizable = i > 0;
    if (s.kind == LayerKind::dense) {
      L.in_channels = c;
      L.out_channels = s.out_channels;
      Tensor wt({L.out_channels, c});
      const double sd = std::sqrt(1.0 / static_cast<double>(c));
      for (auto& v : wt.vec()) v = rng.normal() * sd;
      L.weight = Var(std::move(wt), true);
      L.bias = Var(Tensor({L.out_channels}, 0.0), true);
      c = L.out_channels;
      h = w = 1;
    } else {
      L.in_channels = c;
      L.in_h = h;
      L.in_w = w;
      L.out_channels = s.kind == LayerKind::depthwise ? c : s.out_channels;
      L.groups = s.kind == LayerKind::depthwise ? c : 1;
      L.pad = s.kernel / 2;
      L.out_h = conv_out_extent(h, s.kernel, s.stride, L.pad);
      L.out_w = conv_out_extent(w, s.kernel, s.stride, L.pad);
      const std::size_t cg = c / L.groups;
      Tensor wt({L.out_channels, cg, s.kernel, s.kernel});
      const double sd = std::sqrt(2.0 / static_cast<double>(cg * s.kernel * s.kernel));
      for (auto& v : wt.vec()) v = rng.normal() * sd;
      L.weight = Var(std::move(wt), true);
      L.bn_gamma = Var(Tensor({L.out_channels}, 1.0), true);
      L.bn_beta = Var(Tensor({L.out_channels}, 0.0), true);
      L.running_mean = Tensor({L.out_channels}, 0.0);
      L.running_var = Tensor({L.out_channels}, 1.0);
      c = L.out_channels;
      h = L.out_h;
      w = L.out_w;
    }
    prev_act = s.activation;
    layers_.push_back(std::move(L));
  }
  QuantConfig fp;
  fp.negative_padding = false;
  configure_quantization(fp);
}

void Network::configure_quantization(const QuantConfig& q) {
  quant_ = q;
  for (Layer& L : layers_) {
    L.input_quantizable = L.id > 0 || q.first_layer_input_quantized;
    L.weight_q = Quantizer(QuantRole::weight, QuantKind::duq, QuantMode::symmetric);
    L.weight_q.set_learned(q.weight_learned);
    L.input_q = Quantizer(QuantRole::activation, q.act_kind, q.act_mode);
    L.pad_value = 0.0;
    if (!L.spec.quantized) continue;
    L.weight_q.set_bits(q.weight_bits);
    if (L.input_quantizable) L.input_q.set_bits(q.act_bits);
    const auto m = activation_minimum(L.input_activation);
    const bool negpad = q.negative_padding && q.act_kind == QuantKind::duq &&
                        q.act_mode == QuantMode::asymmetric && m.has_value() &&
                        *m != 0.0;
    if (negpad) {
      if (L.is_conv()) L.pad_value = *m;
      if (L.input_quantizable) L.input_q.pin_beta(*m);
    }
  }
}

void Network::set_bits(int weight_bits, int act_bits) {
  quant_.weight_bits = weight_bits;
  quant_.act_bits = act_bits;
  for (Layer& L : layers_) {
    if (!L.spec.quantized) continue;
    L.weight_q.set_bits(weight_bits);
    if (L.input_quantizable) L.input_q.set_bits(act_bits);
  }
}

void Network::set_weight_levels(int n_lv) {
  for (Layer& L : layers_) {
    if (L.spec.quantized) L.weight_q.set_levels(n_lv);
  }
}

namespace {

Var apply_activation(const Var& x, Activation a) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::relu6: return relu6(x);
    case Activation::h_swish: return h_swish(x);
    case Activation::none: break;
  }
  return x;
}

Conv2dOptions conv_options(const Layer& L) {
  return Conv2dOptions{L.spec.stride, L.pad, L.groups, L.pad_value};
}

}  // namespace

Var Network::forward(const Tensor& x, bool training, ForwardTrace* trace,
                     bool update_running_stats) {
  const Shape expect{config_.in_channels, config_.in_height, config_.in_width};
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != expect) {
    throw ShapeError("network input must be [N," + std::to_string(expect[0]) + "," +
                     std::to_string(expect[1]) + "," + std::to_string(expect[2]) +
                     "], got " + shape_str(x.shape()));
  }
  if (trace) *trace = ForwardTrace{};
  Var h(x, false);
  for (Layer& L : layers_) {
    if (!L.is_conv() && h.value().rank() == 4) h = global_avg_pool(h);
    const bool q = L.spec.quantized;
    Var in = (q && L.input_quantizable) ? L.input_q.apply(h) : h;
    Var w = q ? L.weight_q.apply(L.weight) : L.weight;
    Var y = L.is_conv() ? conv2d(in, w, std::nullopt, conv_options(L))
                        : dense(in, w, L.bias);
    if (trace) {
      trace->inputs.push_back(in.value());
      trace->weights.push_back(w.value());
      trace->linear_out.push_back(y.value());
    }
    if (L.is_conv()) {
      y = batch_norm(y, L.bn_gamma, L.bn_beta, L.running_mean, L.running_var,
                     BatchNormOptions{bn_momentum, bn_eps, training, update_running_stats});
    }
    y = apply_activation(y, L.spec.activation);
    if (trace) trace->activations.push_back(y.value());
    h = y;
  }
  return h;
}

Tensor Network::quantized_weight(std::size_t layer) const {
  const Layer& L = layers_.at(layer);
  const Tensor& w = L.weight.value();
  if (!L.spec.quantized || !L.weight_q.enabled()) return w;
  QuantParams qp = L.weight_q.params();
  if (!L.weight_q.learned()) {
    qp = make_weight_quantizer(2, w);
  }
  qp.mode = L.weight_q.mode();
  qp.n_lv = L.weight_q.n_lv();
  return duq_forward(w, qp);
}

Tensor Network::linear(std::size_t layer, const Tensor& input, const Tensor& weight) const {
  const Layer& L = layers_.at(layer);
  NoGradGuard guard;
  Var x(input), w(weight);
  Var y = L.is_conv() ? conv2d(x, w, std::nullopt, conv_options(L))
                      : dense(x, w, std::nullopt);
  return y.value();
}

std::vector<std::size_t> Network::quantized_layer_ids() const {
  std::vector<std::size_t> ids;
  for (const Layer& L : layers_) {
    if (L.spec.quantized) ids.push_back(L.id);
  }
  return ids;
}

std::vector<ParamRef> Network::parameters() const {
  std::vector<ParamRef> out;
  for (const Layer& L : layers_) {
    const std::string p = "L" + std::to_string(L.id) + ".";
    out.push_back({p + "weight", L.weight, ParamRole::weight, L.id});
    if (L.bias) out.push_back({p + "bias", *L.bias, ParamRole::bias, L.id});
    if (L.is_conv()) {
      out.push_back({p + "bn.gamma", L.bn_gamma, ParamRole::bn_gamma, L.id});
      out.push_back({p + "bn.beta", L.bn_beta, ParamRole::bn_beta, L.id});
    }
    if (!L.spec.quantized) continue;
    for (const auto& [tag, q] : {std::pair<const char*, const Quantizer*>{"wq.", &L.weight_q},
                                 {"aq.", &L.input_q}}) {
      const auto trainable = q->trainable();
      for (const auto& [name, v] : q->state()) {
        for (const Var& t : trainable) {
          if (t.node() == v.node()) {
            out.push_back({p + tag + name, v, ParamRole::quant, L.id});
          }
        }
      }
    }
  }
  return out;
}

std::map<std::string, Tensor> Network::state_dict() const {
  std::map<std::string, Tensor> s;
  for (const Layer& L : layers_) {
    const std::string p = "L" + std::to_string(L.id) + ".";
    s[p + "weight"] = L.weight.value();
    if (L.bias) s[p + "bias"] = L.bias->value();
    if (L.is_conv()) {
      s[p + "bn.gamma"] = L.bn_gamma.value();
      s[p + "bn.beta"] = L.bn_beta.value();
      s[p + "bn.running_mean"] = L.running_mean;
      s[p + "bn.running_var"] = L.running_var;
    }
    for (const auto& [tag, q] : {std::pair<const char*, const Quantizer*>{"wq.", &L.weight_q},
                                 {"aq.", &L.input_q}}) {
      for (const auto& [name, v] : q->state()) s[p + tag + name] = v.value();
      s[p + tag + "n_lv"] = Tensor::scalar(q->n_lv());
      s[p + tag + "calibrated"] = Tensor::scalar(q->calibrated() ? 1.0 : 0.0);
      s[p + tag + "pinned"] = Tensor::scalar(q->beta_pinned() ? 1.0 : 0.0);
    }
  }
  return s;
}

void Network::load_state_dict(const std::map<std::string, Tensor>& state) {
  auto fetch = [&](const std::string& key, const Shape& shape) -> const Tensor& {
    auto it = state.find(key);
    if (it == state.end()) throw Error("state dict is missing '" + key + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("state dict entry '" + key + "' has shape " +
                       shape_str(it->second.shape()) + ", expected " + shape_str(shape));
    }
    return it->second;
  };
  for (Layer& L : layers_) {
    const std::string p = "L" + std::to_string(L.id) + ".";
    L.weight.mutable_value() = fetch(p + "weight", L.weight.shape());
    if (L.bias) L.bias->mutable_value() = fetch(p + "bias", L.bias->shape());
    if (L.is_conv()) {
      L.bn_gamma.mutable_value() = fetch(p + "bn.gamma", L.bn_gamma.shape());
      L.bn_beta.mutable_value() = fetch(p + "bn.beta", L.bn_beta.shape());
      L.running_mean = fetch(p + "bn.running_mean", L.running_mean.shape());
      L.running_var = fetch(p + "bn.running_var", L.running_var.shape());
    }
    for (const auto& [tag, q] : {std::pair<const char*, Quantizer*>{"wq.", &L.weight_q},
                                 {"aq.", &L.input_q}}) {
      const Shape one{1};
      q->set_levels(static_cast<int>(fetch(p + tag + "n_lv", one)[0]));
      if (fetch(p + tag + "pinned", one)[0] != 0.0) {
        q->pin_beta(fetch(p + tag + "beta", one)[0]);
      }
      for (auto& [name, v] : q->state()) {
        Var handle = v;
        handle.mutable_value() = fetch(p + tag + name, one);
      }
      q->mark_calibrated(fetch(p + tag + "calibrated", one)[0] != 0.0);
    }
  }
}

}  // namespace pq
