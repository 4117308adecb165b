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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajq {

class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dependency tree over surface-ordered tokens. heads[i] is the 0-based index
// of token i's head, or kRoot for the root.
struct DepTree {
  static constexpr std::size_t kRoot = std::numeric_limits<std::size_t>::max();

  std::vector<std::string> tokens;
  std::vector<std::size_t> heads;
  std::size_t root = kRoot;

  std::size_t size() const { return tokens.size(); }

  // Children of each node in surface order.
  std::vector<std::vector<std::size_t>> children() const {
    std::vector<std::vector<std::size_t>> out(tokens.size());
    for (std::size_t i = 0; i < heads.size(); ++i)
      if (heads[i] != kRoot) out[heads[i]].push_back(i);
    return out;
  }

  // Throws TreeError unless there is exactly one root and every token reaches
  // it without revisiting a node.
  void validate() const {
    if (tokens.empty()) throw TreeError("dependency tree has no tokens");
    if (heads.size() != tokens.size()) throw TreeError("head count differs from token count");
    std::size_t roots = 0, found = kRoot;
    for (std::size_t i = 0; i < heads.size(); ++i) {
      if (heads[i] == kRoot) {
        ++roots;
        found = i;
      } else if (heads[i] >= tokens.size()) {
        throw TreeError("token " + std::to_string(i + 1) + " has out-of-range head " +
                        std::to_string(heads[i] + 1));
      }
    }
    if (roots != 1) {
      throw TreeError("dependency tree must have exactly one root, found " +
                      std::to_string(roots));
    }
    if (root != found) throw TreeError("root index does not match the head column");
    for (std::size_t i = 0; i < heads.size(); ++i) {
      std::size_t cur = i, hops = 0;
      while (heads[cur] != kRoot) {
        cur = heads[cur];
        if (++hops > heads.size()) {
          throw TreeError("cycle through token " + std::to_string(i + 1));
        }
      }
    }
  }

  // Builds from 1-based CoNLL-style heads (0 = root).
  static DepTree from_conll_heads(std::vector<std::string> tokens,
                                  const std::vector<std::size_t>& heads_1based) {
    DepTree t;
    t.tokens = std::move(tokens);
    t.heads.resize(heads_1based.size());
    for (std::size_t i = 0; i < heads_1based.size(); ++i) {
      if (heads_1based[i] == 0) {
        t.heads[i] = kRoot;
        if (t.root == kRoot) t.root = i;
      } else {
        t.heads[i] = heads_1based[i] - 1;
      }
    }
    return t;
  }
};

}  // namespace trajq
