// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pq {

Trainer::Trainer(Network net, TrainOptions opts, std::uint64_t seed)
    : net_(std::move(net)), opts_(opts), rng_(seed) {
  if (opts_.batch_size < 2) throw Error("batch_size must be >= 2 for batch norm");
  if (opts_.ema_decay) make_ema_state(Tensor::scalar(0.0), *opts_.ema_decay);
}

void Trainer::set_teacher(Network teacher, double temperature, double weight) {
  if (!(temperature > 0.0)) throw Error("distillation temperature must be > 0");
  if (weight < 0.0 || weight > 1.0) throw Error("distillation weight must be in [0,1]");
  teacher_ = std::move(teacher);
  kd_temperature_ = temperature;
  kd_weight_ = weight;
}

StepResult Trainer::step(const Dataset& batch, double lr, ForwardTrace* trace) {
  auto params = net_.parameters();
  for (auto& p : params) p.var.zero_grad();

  Var logits = net_.forward(batch.images, /*training=*/true, trace);
  Var loss;
  if (teacher_) {
    Tensor t;
    {
      NoGradGuard guard;
      t = teacher_->forward(batch.images, false).value();
    }
    loss = kd_loss(logits, t, batch.labels, kd_temperature_, kd_weight_);
  } else {
    loss = softmax_cross_entropy(logits, batch.labels);
  }
  if (!std::isfinite(loss.value()[0])) {
    throw NumericError("training diverged: loss is " + std::to_string(loss.value()[0]) +
                       " at step " + std::to_string(steps_));
  }
  backward(loss);

  // Quantizer parameters may have been created by lazy calibration.
  params = net_.parameters();
  for (auto& p : params) {
    if (frozen_params_.count(p.name)) continue;
    if (!p.var.has_grad()) continue;
    SgdState& s = sgd_[p.name];
    s.momentum = opts_.momentum;
    s.weight_decay = p.role == ParamRole::weight ? opts_.weight_decay : 0.0;
    s.lr = p.role == ParamRole::quant ? lr * opts_.quant_lr_mult : lr;
    sgd_step(p.var.mutable_value(), p.var.grad(), s);
  }
  if (opts_.ema_decay) {
    for (auto& p : params) {
      auto it = ema_.find(p.name);
      if (it == ema_.end()) {
        ema_.emplace(p.name, make_ema_state(p.var.value(), *opts_.ema_decay));
      } else {
        ema_update(it->second, p.var.value());
      }
    }
  }
  ++steps_;

  StepResult r;
  r.loss = loss.value()[0];
  const Tensor& z = logits.value();
  const std::size_t K = z.dim(1);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto row = z.data().subspan(n * K, K);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == batch.labels[n]) ++r.correct;
  }
  return r;
}

std::vector<std::vector<std::size_t>> Trainer::epoch_batches(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  const std::size_t B = opts_.batch_size;
  for (std::size_t i = 0; i + B <= n; i += B) {
    out.emplace_back(order.begin() + i, order.begin() + i + B);
  }
  if (out.empty()) throw Error("dataset smaller than one batch");
  return out;
}

std::vector<EpochRecord> Trainer::run_stage(const std::string& name, const Dataset& train,
                                            std::size_t epochs, const StageOptions& lr,
                                            const Dataset* test,
                                            const EpochCallback& on_epoch) {
  std::vector<EpochRecord> records;
  if (epochs == 0) return records;
  const std::size_t per_epoch = train.size() / opts_.batch_size;
  const std::size_t total = per_epoch * epochs;
  const auto warmup = static_cast<std::size_t>(
      std::floor(lr.warmup_fraction * static_cast<double>(total)));
  std::size_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    double loss_sum = 0.0, rate = 0.0;
    std::size_t correct = 0, seen = 0;
    for (const auto& idx : epoch_batches(train.size())) {
      rate = cosine_lr(t, total, std::min(warmup, total - 1), lr.base_lr);
      const StepResult r = step(train.subset(idx), rate);
      loss_sum += r.loss * static_cast<double>(idx.size());
      correct += r.correct;
      seen += idx.size();
      ++t;
    }
    ++epochs_;
    EpochRecord rec;
    rec.stage = name;
    rec.epoch = epochs_;
    rec.lr = rate;
    rec.loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    if (test) rec.test_acc = evaluate(*test, opts_.ema_decay.has_value()).top1;
    if (on_epoch) on_epoch(rec);
    records.push_back(rec);
  }
  return records;
}

Accuracy accuracy_of(const Tensor& logits, std::span<const int> labels) {
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (labels.size() != N) throw ShapeError("accuracy_of: label count mismatch");
  std::size_t c1 = 0, c5 = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const double target = logits[n * K + labels[n]];
    // Rank = number of classes scoring strictly higher; ties favour the label.
    std::size_t higher = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (logits[n * K + k] > target) ++higher;
    }
    if (higher == 0) ++c1;
    if (higher < 5) ++c5;
  }
  const double n = static_cast<double>(std::max<std::size_t>(N, 1));
  return {static_cast<double>(c1) / n, static_cast<double>(c5) / n};
}

Tensor predict(Network& net, const Dataset& data, std::size_t chunk) {
  NoGradGuard guard;
  const std::size_t K = net.config().num_classes;
  Tensor out({data.size(), K});
  for (std::size_t b = 0; b < data.size(); b += chunk) {
    const Dataset part = data.slice(b, b + chunk);
    const Tensor z = net.forward(part.images, false).value();
    std::copy(z.data().begin(), z.data().end(), out.data().begin() + b * K);
  }
  return out;
}

Accuracy Trainer::evaluate(const Dataset& data, bool use_ema) const {
  Network net = use_ema ? ema_network() : net_.clone();
  return accuracy_of(predict(net, data), data.labels);
}

void Trainer::freeze_layer(std::size_t layer) {
  if (layer >= net_.layers().size()) {
    throw Error("cannot freeze unknown layer " + std::to_string(layer));
  }
  if (frozen_layers_.count(layer)) {
    throw Error("layer " + std::to_string(layer) + " is already frozen");
  }
  frozen_layers_.insert(layer);
  for (const auto& p : net_.parameters()) {
    if (p.layer != layer) continue;
    if (p.role == ParamRole::bn_gamma || p.role == ParamRole::bn_beta) continue;
    frozen_params_.insert(p.name);
    auto it = sgd_.find(p.name);
    if (it != sgd_.end()) {
      it->second.lr = 0.0;
      it->second.velocity = Tensor();
    }
  }
}

void Trainer::freeze_all_but_normalization() {
  for (const Layer& L : net_.layers()) {
    if (!frozen_layers_.count(L.id)) freeze_layer(L.id);
  }
}

void Trainer::reset_ema() {
  ema_.clear();
  if (!opts_.ema_decay) return;
  for (const auto& p : net_.parameters()) {
    ema_.emplace(p.name, make_ema_state(p.var.value(), *opts_.ema_decay));
  }
}

Network Trainer::ema_network() const {
  Network net = net_.clone();
  for (auto& p : net.parameters()) {
    auto it = ema_.find(p.name);
    if (it != ema_.end()) p.var.mutable_value() = it->second.shadow;
  }
  return net;
}

Trainer Trainer::clone() const { return *this; }

}  // namespace pq
