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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajq {

// Complete binary tree over leaf weights. Internal nodes are recomputed from
// their children on every update, so each one is exactly the sum of its two
// children in the arithmetic of T. Draws descend from the root and touch one
// node per level.
template <class T>
class SumTree {
 public:
  explicit SumTree(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("SumTree: capacity must be positive");
    leaves_ = 1;
    while (leaves_ < capacity) leaves_ <<= 1;
    nodes_.assign(2 * leaves_, T{0});
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t depth() const {
    std::size_t d = 1;
    for (std::size_t n = leaves_; n > 1; n >>= 1) ++d;
    return d;
  }

  T total() const { return nodes_[1]; }
  T get(std::size_t leaf) const { return nodes_[leaves_ + check(leaf)]; }

  void set(std::size_t leaf, T weight) {
    if (weight < T{0}) throw std::invalid_argument("SumTree: negative weight");
    std::size_t node = leaves_ + check(leaf);
    nodes_[node] = weight;
    for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
  }

  // Leaf whose cumulative range contains `prefix`, for prefix in [0, total).
  std::size_t find(T prefix) const {
    std::size_t node = 1;
    ++visits_;
    while (node < leaves_) {
      std::size_t left = 2 * node;
      ++visits_;
      if (prefix < nodes_[left] || nodes_[left + 1] == T{0}) {
        node = left;
      } else {
        prefix -= nodes_[left];
        node = left + 1;
      }
    }
    std::size_t leaf = node - leaves_;
    // Rounding can land on an empty leaf at the very top of the range.
    while (nodes_[leaves_ + leaf] == T{0} && leaf > 0) --leaf;
    return leaf;
  }

  // Internal consistency: every node equals the sum of its children.
  bool consistent() const {
    for (std::size_t n = 1; n < leaves_; ++n)
      if (nodes_[n] != nodes_[2 * n] + nodes_[2 * n + 1]) return false;
    return true;
  }

  T leaf_sum() const {
    T s{0};
    for (std::size_t i = 0; i < capacity_; ++i) s += nodes_[leaves_ + i];
    return s;
  }

  std::uint64_t visits() const { return visits_; }
  void reset_visits() { visits_ = 0; }

 private:
  std::size_t check(std::size_t leaf) const {
    if (leaf >= capacity_) {
      throw std::out_of_range("SumTree: leaf " + std::to_string(leaf) + " out of range");
    }
    return leaf;
  }

  std::size_t capacity_;
  std::size_t leaves_;
  std::vector<T> nodes_;
  mutable std::uint64_t visits_ = 0;
};

}  // namespace trajq
