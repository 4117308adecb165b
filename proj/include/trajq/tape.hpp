// Copyright 2026 The trajq Authors. All rights reserved.
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

// Reverse-mode differentiation tape.
//
// Every primitive appends one record holding the closure that propagates the
// output gradient back to its inputs. Records are appended in evaluation
// order, which is a topological order, so backward() simply walks them in
// reverse. Parameter nodes alias the Param storage directly: their values are
// never copied and their gradients accumulate in Param::grad.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "trajq/tensor.hpp"

namespace trajq {

struct Var {
  std::size_t id = 0;
};

template <class Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var out)>;

  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  Var param(Param<Real>& p) {
    Node n;
    n.shape = p.value.shape;
    n.param = &p;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var constant(Tensor<Real> t) {
    Node n;
    n.shape = std::move(t.shape);
    n.value = std::move(t.data);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var constant(Shape shape, std::vector<Real> values) {
    return constant(Tensor<Real>(std::move(shape), std::move(values)));
  }

  // Appends an op output. `fn` is kept only when some input needs a gradient.
  Var record(Shape shape, std::vector<Real> value, std::initializer_list<Var> inputs,
             BackwardFn fn) {
    return record(std::move(shape), std::move(value), std::span<const Var>(inputs),
                  std::move(fn));
  }

  Var record(Shape shape, std::vector<Real> value, std::span<const Var> inputs,
             BackwardFn fn) {
    if (value.size() != numel(shape)) {
      throw ShapeError("op output length does not match shape " + shape_string(shape));
    }
    bool needs = false;
    for (Var v : inputs) needs = needs || node(v).requires_grad;
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.requires_grad = needs;
    nodes_.push_back(std::move(n));
    Var out{nodes_.size() - 1};
    if (needs) records_.emplace_back(out.id, std::move(fn));
    return out;
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const Shape& shape(Var v) const { return node(v).shape; }
  std::size_t numel_of(Var v) const { return numel(node(v).shape); }

  std::span<const Real> value(Var v) const {
    const Node& n = node(v);
    if (n.param) return n.param->value.data;
    return n.value;
  }

  Real scalar(Var v) const {
    auto x = value(v);
    if (x.size() != 1) throw ShapeError("expected a scalar, got " + shape_string(shape(v)));
    return x[0];
  }

  // Gradient accumulator of `v`, allocated as zeros on first access.
  std::span<Real> grad(Var v) {
    Node& n = node(v);
    if (n.param) return n.param->grad_span();
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), Real{0});
    return n.grad;
  }

  bool has_grad(Var v) const {
    const Node& n = node(v);
    return n.param != nullptr || !n.grad.empty();
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t record_count() const { return records_.size(); }

  // Propagates d(output)/d(node) to every node, zeroing parameter gradients
  // first. Each record is visited exactly once.
  void backward(Var output) {
    if (numel(shape(output)) != 1) {
      throw ShapeError("backward requires a scalar output, got " +
                       shape_string(shape(output)));
    }
    if (backward_done_) throw std::logic_error("backward already ran on this tape");
    backward_done_ = true;
    for (Node& n : nodes_) {
      if (n.param) n.param->zero_grad();
    }
    if (!requires_grad(output)) return;
    grad(output)[0] = Real{1};
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (!has_grad(Var{it->first})) continue;
      it->second(*this, Var{it->first});
    }
  }

 private:
  struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    Param<Real>* param = nullptr;
    bool requires_grad = false;
  };

  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, BackwardFn>> records_;
  bool backward_done_ = false;
};

}  // namespace trajq
