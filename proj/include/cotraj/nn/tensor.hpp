/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Dense row-major tensors of doubles with a per-forward reverse-mode tape.
//
// Every op produces a new Node that keeps shared ownership of its parents and
// a closure that pushes its gradient back into them. Dropping the last handle
// to the loss releases the whole tape. Leaf tensors (no parents) with
// requires_grad accumulate gradients across backward calls; interior nodes are
// zeroed at the start of every backward.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cotraj/common.hpp"

namespace cotraj::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) {
    detail::grad_enabled_flag() = false;
  }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  bool is_leaf() const { return parents.empty(); }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  // Leading dimension may be zero (empty edge or row sets); all other
  // dimensions must be positive.
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false) {
    if (shape.empty()) throw std::invalid_argument("tensor shape is empty");
    for (std::size_t i = 1; i < shape.size(); ++i) {
      if (shape[i] == 0) {
        throw std::invalid_argument("non-positive tensor dimension in " +
                                    shape_string(shape));
      }
    }
    if (values.size() != shape_size(shape)) {
      throw std::invalid_argument("tensor value count " +
                                  std::to_string(values.size()) +
                                  " does not match shape " +
                                  shape_string(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor filled(Shape shape, double v) {
    const std::size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, v));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values,
                       bool requires_grad = false) {
    return from({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  // Rank-1 tensors behave as a single row.
  std::size_t rows() const {
    return rank() == 1 ? 1 : node_->shape[0];
  }
  std::size_t cols() const {
    return rank() == 1 ? node_->shape[0] : size() / std::max<std::size_t>(rows(), 1);
  }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }
  double item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return node_->value[0];
  }

  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
  }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds a result node; records parents and the backward closure only when the
// tape is on and some parent participates in differentiation.
inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node_ptr());
      n->backward = std::move(backward);
    }
  }
  return Tensor(std::move(n));
}

// Reverse-mode accumulation from a scalar loss.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss tensor");
  }
  if (!loss.requires_grad()) {
    throw std::logic_error(
        "backward() through a detached graph: loss does not require grad");
  }
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->backward(*n);
    }
  }
}

}  // namespace cotraj::nn
