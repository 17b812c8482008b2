// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Toy CNNs built from conv / depthwise / dense layers. Every conv layer is
// conv -> batchnorm -> activation; the first dense layer is preceded by global
// average pooling. A quantized layer fake-quantizes its weight and its input.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pq/ops.hpp"
#include "pq/quant.hpp"

namespace pq {

enum class LayerKind { conv, depthwise, dense };
enum class Activation { none, relu, relu6, h_swish };

std::string to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);
std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Minimum of an activation's range, or nullopt when unbounded below.
std::optional<double> activation_minimum(Activation a);

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::size_t out_channels = 0;  // ignored for depthwise (equals input)
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Activation activation = Activation::h_swish;
  bool quantized = true;
};

struct NetConfig {
  std::size_t in_channels = 1;
  std::size_t in_height = 16;
  std::size_t in_width = 16;
  std::size_t num_classes = 10;
  std::vector<LayerSpec> layers;

  /// Throws ShapeError when consecutive shapes do not compose.
  void validate() const;
};

struct MicroMobileNetOptions {
  std::size_t in_channels = 1;
  std::size_t in_size = 16;
  std::size_t num_classes = 10;
  std::size_t stem_width = 8;
  /// Output widths of the depthwise-separable blocks.
  std::vector<std::size_t> block_widths{16, 32};
  /// Strides of the depthwise conv of each block.
  std::vector<std::size_t> block_strides{2, 1};
  Activation activation = Activation::h_swish;
  /// Multiplies every width (2 for the distillation teacher).
  std::size_t width_mult = 1;
};

/// Stem conv, K depthwise-separable blocks (dw 3x3 + pw 1x1), pooled dense head.
NetConfig micro_mobilenet(const MicroMobileNetOptions& opts);

struct QuantConfig {
  int weight_bits = 0;  // 0 = full precision
  int act_bits = 0;
  QuantKind act_kind = QuantKind::duq;
  QuantMode act_mode = QuantMode::asymmetric;
  bool weight_learned = true;
  bool first_layer_input_quantized = false;
  /// Pads convs fed by a bounded-below activation with that minimum and pins
  /// the bottom level of their input quantizer to it. Only takes effect for
  /// asymmetric DuQ activation quantizers; otherwise padding stays zero.
  bool negative_padding = true;
};

enum class ParamRole { weight, bias, bn_gamma, bn_beta, quant };

struct ParamRef {
  std::string name;
  Var var;
  ParamRole role;
  std::size_t layer;
};

/// Copies are deep: a copied layer owns independent parameter storage.
struct Layer {
  Layer() = default;
  Layer(const Layer& other);
  Layer& operator=(const Layer& other);
  Layer(Layer&&) = default;
  Layer& operator=(Layer&&) = default;

  std::size_t id = 0;
  std::string name;
  LayerSpec spec;
  std::size_t in_channels = 0, in_h = 1, in_w = 1;
  std::size_t out_channels = 0, out_h = 1, out_w = 1;
  std::size_t groups = 1;
  std::size_t pad = 0;
  double pad_value = 0.0;
  Activation input_activation = Activation::none;

  Var weight;
  std::optional<Var> bias;  // dense only
  Var bn_gamma, bn_beta;    // conv layers only
  Tensor running_mean, running_var;

  Quantizer weight_q;
  Quantizer input_q;
  bool input_quantizable = true;

  bool is_conv() const { return spec.kind != LayerKind::dense; }
  std::size_t macs() const;
  std::size_t num_weights() const { return weight.value().numel(); }
};

/// Per-layer tensors captured during a forward pass.
struct ForwardTrace {
  std::vector<Tensor> inputs;      // (fake-quantized) layer inputs
  std::vector<Tensor> weights;     // (fake-quantized) weights as used
  std::vector<Tensor> linear_out;  // conv/dense outputs before normalization
  std::vector<Tensor> activations; // post-activation outputs (conv layers)
};

class Network {
 public:
  Network() = default;
  Network(NetConfig config, std::uint64_t seed);

  const NetConfig& config() const { return config_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const QuantConfig& quant_config() const { return quant_; }

  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  /// Installs quantizers of the configured kinds and sets bit widths.
  /// Calibration happens lazily on the next forward pass.
  void configure_quantization(const QuantConfig& q);
  /// Changes level counts, keeping already-calibrated ranges.
  void set_bits(int weight_bits, int act_bits);
  /// Sets explicit weight level counts on every quantized layer.
  void set_weight_levels(int n_lv);

  Var forward(const Tensor& x, bool training, ForwardTrace* trace = nullptr,
              bool update_running_stats = true);

  /// Fake-quantized weight of a layer, without gradient tracking.
  Tensor quantized_weight(std::size_t layer) const;
  /// Linear part (conv or dense, no bias/BN) of a layer on a given input.
  Tensor linear(std::size_t layer, const Tensor& input, const Tensor& weight) const;

  std::vector<std::size_t> quantized_layer_ids() const;

  /// Trainable parameters in a fixed order.
  std::vector<ParamRef> parameters() const;

  /// Every persistent tensor (parameters, running stats, all quantizer state).
  std::map<std::string, Tensor> state_dict() const;
  void load_state_dict(const std::map<std::string, Tensor>& state);

  /// Deep copy; equivalent to the copy constructor.
  Network clone() const { return *this; }

 private:
  NetConfig config_;
  QuantConfig quant_;
  std::vector<Layer> layers_;
};

}  // namespace pq
