// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/optim.hpp"
#include "pq/random.hpp"

namespace pq {

struct TrainOptions {
  std::size_t batch_size = 32;
  double momentum = 0.9;
  double weight_decay = 0.0;
  /// Disabled when unset.
  std::optional<double> ema_decay;
  /// Learning-rate multiplier for quantizer range parameters.
  double quant_lr_mult = 1.0;
};

struct StageOptions {
  double base_lr = 0.2;
  /// Fraction of the stage's steps spent in linear warmup.
  double warmup_fraction = 0.1;
};

struct Accuracy {
  double top1 = 0.0;
  double top5 = 0.0;
};

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;  // global epoch counter, 1-based
  double lr = 0.0;        // learning rate at the last step of the epoch
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_acc;
};

struct StepResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

class Trainer {
 public:
  Trainer() = default;
  Trainer(Network net, TrainOptions opts, std::uint64_t seed);

  Network& network() { return net_; }
  const Network& network() const { return net_; }
  const TrainOptions& options() const { return opts_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  /// Distill from a fixed full-precision teacher.
  void set_teacher(Network teacher, double temperature, double weight);
  bool has_teacher() const { return teacher_.has_value(); }

  /// One SGD iteration on `batch` at learning rate `lr`.
  StepResult step(const Dataset& batch, double lr, ForwardTrace* trace = nullptr);

  /// Shuffled mini-batch indices for one epoch (incomplete tail dropped).
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n);

  /// Trains `epochs` epochs under a warmup + cosine schedule that restarts at
  /// the beginning of this stage.
  std::vector<EpochRecord> run_stage(const std::string& name, const Dataset& train,
                                     std::size_t epochs, const StageOptions& lr,
                                     const Dataset* test = nullptr,
                                     const EpochCallback& on_epoch = {});

  /// Deterministic accuracy over the whole split with BN in eval mode.
  Accuracy evaluate(const Dataset& data, bool use_ema) const;

  /// Sets the layer's weight, bias and quantizer learning rates to zero and
  /// drops their momentum. Normalization parameters are left trainable.
  void freeze_layer(std::size_t layer);
  /// Freezes everything except normalization affine parameters.
  void freeze_all_but_normalization();
  bool is_frozen(std::size_t layer) const { return frozen_layers_.count(layer) > 0; }
  bool is_param_frozen(const std::string& name) const { return frozen_params_.count(name) > 0; }
  const std::set<std::size_t>& frozen_layers() const { return frozen_layers_; }

  /// Re-seeds every EMA shadow from the current parameters.
  void reset_ema();
  /// Copy of the network with parameters replaced by their EMA shadows.
  Network ema_network() const;

  std::size_t epochs_trained() const { return epochs_; }
  std::size_t steps_taken() const { return steps_; }
  void set_counters(std::size_t epochs, std::size_t steps) {
    epochs_ = epochs;
    steps_ = steps;
  }

  std::map<std::string, SgdState>& sgd_states() { return sgd_; }
  const std::map<std::string, SgdState>& sgd_states() const { return sgd_; }
  std::map<std::string, EmaState>& ema_states() { return ema_; }
  const std::map<std::string, EmaState>& ema_states() const { return ema_; }

  /// Deep copy: independent network, optimizer, EMA and RNG state. Same as
  /// the copy constructor.
  Trainer clone() const;

 private:
  Network net_;
  TrainOptions opts_;
  Rng rng_;
  std::map<std::string, SgdState> sgd_;
  std::map<std::string, EmaState> ema_;
  std::set<std::string> frozen_params_;
  std::set<std::size_t> frozen_layers_;
  std::optional<Network> teacher_;
  double kd_temperature_ = 1.0;
  double kd_weight_ = 0.0;
  std::size_t epochs_ = 0;
  std::size_t steps_ = 0;
};

/// Top-1/top-5 of logits [N,K] against labels.
Accuracy accuracy_of(const Tensor& logits, std::span<const int> labels);

/// Eval-mode logits of `net` over `data` in fixed-size chunks.
Tensor predict(Network& net, const Dataset& data, std::size_t chunk = 256);

}  // namespace pq
