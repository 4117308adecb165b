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

// Dependency-based sentence reordering.
//
// A sentence becomes a list of blocks, one per token with children: the head
// followed by its children in surface order. Blocks are read level by level
// from the root and are separated by N-1 pad tokens so that no width-N
// convolution window sees two blocks at once.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajq/conllu.hpp"
#include "trajq/dep_tree.hpp"
#include "trajq/trajectory.hpp"

namespace trajq {

struct Block {
  std::size_t head_index = 0;
  std::string head;
  std::vector<std::size_t> child_indices;
  std::vector<std::string> children;

  std::size_t size() const { return 1 + children.size(); }
};

inline std::vector<Block> blocks_from_tree(const DepTree& tree) {
  tree.validate();
  const auto kids = tree.children();
  std::vector<Block> blocks;
  std::vector<std::size_t> level{tree.root};
  while (!level.empty()) {
    std::sort(level.begin(), level.end());
    std::vector<std::size_t> next;
    for (std::size_t h : level) {
      if (kids[h].empty()) continue;
      Block b;
      b.head_index = h;
      b.head = tree.tokens[h];
      for (std::size_t c : kids[h]) {
        b.child_indices.push_back(c);
        b.children.push_back(tree.tokens[c]);
        next.push_back(c);
      }
      blocks.push_back(std::move(b));
    }
    level = std::move(next);
  }
  return blocks;
}

inline std::vector<std::string> reorder_with_padding(std::span<const Block> blocks,
                                                     const std::string& pad,
                                                     std::size_t n) {
  if (n < 1) throw std::invalid_argument("reorder_with_padding: N must be >= 1");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out.insert(out.end(), n - 1, pad);
    out.push_back(blocks[i].head);
    out.insert(out.end(), blocks[i].children.begin(), blocks[i].children.end());
  }
  return out;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

// Parses keyed by their lowercased, space-joined forms. Forms are expected to
// follow the tokenizer's segmentation.
class ParseIndex {
 public:
  ParseIndex() = default;

  explicit ParseIndex(const std::vector<ConlluSentence>& sentences) {
    for (const auto& s : sentences) add(s.tree);
  }

  void add(DepTree tree) {
    for (auto& tok : tree.tokens) tok = lower(tok);
    std::string key = join_tokens(tree.tokens);
    trees_.insert_or_assign(std::move(key), std::move(tree));
  }

  const DepTree* find(std::span<const std::string> tokens) const {
    auto it = trees_.find(join_tokens(tokens));
    return it == trees_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return trees_.size(); }
  bool empty() const { return trees_.empty(); }

  // Every token any reordered sentence can emit.
  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    for (const auto& [key, tree] : trees_)
      out.insert(out.end(), tree.tokens.begin(), tree.tokens.end());
    return out;
  }

 private:
  static std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }

  std::unordered_map<std::string, DepTree> trees_;
};

struct ReorderOptions {
  std::size_t n = 5;
  std::string pad = Vocab::kPad;
};

// Reorders a tokenized master. The tokens are split into sentences at '.', '!'
// and '?'; every sentence with a parse is replaced by its padded block form
// and sentences are then joined with N-1 pads. Returns the input unchanged
// when no sentence has a parse.
inline std::vector<std::string> reorder_tokens(const std::vector<std::string>& tokens,
                                               const ParseIndex& parses,
                                               const ReorderOptions& opt) {
  if (parses.empty() || tokens.empty()) return tokens;
  std::vector<std::vector<std::string>> segments(1);
  for (const auto& t : tokens) {
    segments.back().push_back(t);
    if (t == "." || t == "!" || t == "?") segments.emplace_back();
  }
  if (segments.back().empty()) segments.pop_back();

  bool any = false;
  for (auto& seg : segments) {
    if (const DepTree* tree = parses.find(seg)) {
      auto blocks = blocks_from_tree(*tree);
      seg = blocks.empty() ? tree->tokens : reorder_with_padding(blocks, opt.pad, opt.n);
      any = true;
    }
  }
  if (!any) return tokens;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out.insert(out.end(), opt.n - 1, opt.pad);
    out.insert(out.end(), segments[i].begin(), segments[i].end());
  }
  return out;
}

inline Sentence reorder_sentence(Sentence s, const ParseIndex& parses,
                                 const ReorderOptions& opt) {
  if (s.tag == SentenceTag::kMaster) s.tokens = reorder_tokens(s.tokens, parses, opt);
  return s;
}

// Actions and masters without a parse pass through unchanged.
inline Trajectory reorder_trajectory(Trajectory traj, const ParseIndex& parses,
                                     const ReorderOptions& opt) {
  for (auto& s : traj.sentences) s = reorder_sentence(std::move(s), parses, opt);
  return traj;
}

}  // namespace trajq
