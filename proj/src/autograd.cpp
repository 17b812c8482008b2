// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace pq {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::make(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward = std::move(backward);
  return out;
}

void backward(const Var& root) {
  if (root.value().numel() != 1) {
    throw ShapeError("backward() requires a scalar root, got " +
                     shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; parents are visited in declaration order so the
  // accumulation order (and hence rounding) is fixed.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Intermediate grads are not needed after the sweep; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward) {
      n->grad = Tensor();
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace pq
