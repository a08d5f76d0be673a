//
// Copyright 2026 The dualtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dualtrace/tensor.hpp"

namespace dualtrace {

/// A value in the computation graph. Gradients are allocated lazily.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  /// Receives this node (value and gradient) and accumulates into inputs.
  std::function<void(const Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

/// Records op outputs in creation order for reverse-mode differentiation.
/// A disabled tape records nothing, so forward passes allocate only what is
/// still referenced.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(const Node<T>&)>;

  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const noexcept { return enabled_; }

  Var<T> constant(Tensor<T> value) const { return make_leaf(std::move(value), false); }

  /// Wraps `value` as an op output. `backward` receives the output node and
  /// must accumulate into every input that requires grad.
  Var<T> record(Tensor<T> value, std::initializer_list<const Var<T>*> inputs, BackwardFn backward) {
    auto node = make_leaf(std::move(value), false);
    if (!enabled_) return node;
    bool needs = false;
    for (const Var<T>* in : inputs) needs = needs || (*in && (*in)->requires_grad);
    if (!needs) return node;
    node->requires_grad = true;
    node->backward = std::move(backward);
    nodes_.push_back(node);
    return node;
  }

  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
    auto node = make_leaf(std::move(value), false);
    if (!enabled_) return node;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || (in && in->requires_grad);
    if (!needs) return node;
    node->requires_grad = true;
    node->backward = std::move(backward);
    nodes_.push_back(node);
    return node;
  }

  /// Seeds d(root)/d(root) = 1 for a scalar root and runs every recorded
  /// backward function in reverse creation order. Gradients of recorded
  /// intermediates are released once propagated; leaves keep theirs.
  void backward(const Var<T>& root) {
    require(root->value.size() == 1, Errc::ShapeMismatch, "backward root must be a scalar");
    if (!root->requires_grad) return;
    root->grad_buffer()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& node = **it;
      if (!node.grad.empty() && node.backward) {
        node.backward(node);
        node.grad = Tensor<T>();
      }
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  bool enabled_;
  std::vector<Var<T>> nodes_;
};

}  // namespace dualtrace
