// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Tape-free reverse-mode autodiff: every op result keeps shared handles to its
// inputs plus a closure that pushes its gradient back into them. Calling
// backward() on a scalar walks the graph in reverse topological order.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pq/tensor.hpp"

namespace pq {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Returns grad, allocating zeros of value's shape on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }

  bool defined() const { return node_ != nullptr; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Detached leaf holding a copy of this value.
  Var detach() const { return Var(node_->value, false); }
  /// Independent leaf with the same value and requires_grad flag.
  Var deep_copy() const {
    return node_ ? Var(node_->value, node_->requires_grad) : Var();
  }

  /// Builds a result node. Gradient tracking is enabled when any parent
  /// requires it and grad mode is on; otherwise `backward` is dropped.
  static Var make(Tensor value, std::vector<Var> parents,
                  std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

/// Runs reverse accumulation from a scalar root with seed gradient 1.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph construction for its lifetime (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace pq
