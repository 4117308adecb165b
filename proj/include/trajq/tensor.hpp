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

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trajq {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major array.
template <class Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), Real{0}) {}
  Tensor(Shape s, std::vector<Real> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  std::span<Real> span() { return data; }
  std::span<const Real> span() const { return data; }
};

// Trainable tensor with a lazily allocated gradient accumulator.
template <class Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  std::vector<Real> grad;

  Param() = default;
  Param(std::string n, Shape shape) : name(std::move(n)), value(std::move(shape)) {}

  const Shape& shape() const { return value.shape; }
  std::size_t size() const { return value.size(); }

  void zero_grad() { grad.assign(value.size(), Real{0}); }

  std::span<Real> grad_span() {
    if (grad.size() != value.size()) zero_grad();
    return grad;
  }

  template <class Rng>
  void init_uniform(Rng& rng, Real limit) {
    std::uniform_real_distribution<double> dist(-double(limit), double(limit));
    for (auto& x : value.data) x = static_cast<Real>(dist(rng));
  }
};

template <class Real>
void zero_grads(std::span<Param<Real>* const> params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace trajq
