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

#include "trajq/dep_reorder.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trajq/conllu.hpp"
#include "test_util.hpp"

namespace trajq {
namespace {

using Tokens = std::vector<std::string>;

constexpr char kGolden[] = "facing you are side O O side the north house O O house of a white";

DepTree facing_tree() {
  auto s = read_conllu_file(testing::data_path("fixtures/facing.conllu"));
  EXPECT_EQ(s.size(), 1u);
  return s.at(0).tree;
}

DepTree chain() { return DepTree::from_conll_heads({"a", "b", "c"}, {0, 1, 2}); }

TEST(BlocksTest, FacingSentence) {
  auto blocks = blocks_from_tree(facing_tree());
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0].head, "facing");
  EXPECT_EQ(blocks[0].children, (Tokens{"you", "are", "side"}));
  EXPECT_EQ(blocks[1].head, "side");
  EXPECT_EQ(blocks[1].children, (Tokens{"the", "north", "house"}));
  EXPECT_EQ(blocks[2].head, "house");
  EXPECT_EQ(blocks[2].children, (Tokens{"of", "a", "white"}));
}

TEST(BlocksTest, SingleTokenAndChain) {
  EXPECT_TRUE(blocks_from_tree(DepTree::from_conll_heads({"look"}, {0})).empty());
  auto blocks = blocks_from_tree(chain());
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[0].head, "a");
  EXPECT_EQ(blocks[0].children, Tokens{"b"});
  EXPECT_EQ(blocks[1].head, "b");
  EXPECT_EQ(blocks[1].children, Tokens{"c"});
}

TEST(BlocksTest, BreadthFirstTieBreakBySurfaceOrder) {
  // r has children x (index 2) and y (index 0); y's block must come first.
  auto t = DepTree::from_conll_heads({"y", "r", "x", "xc", "yc"}, {2, 0, 2, 3, 1});
  auto blocks = blocks_from_tree(t);
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0].head, "r");
  EXPECT_EQ(blocks[0].children, (Tokens{"y", "x"}));
  EXPECT_EQ(blocks[1].head, "y");
  EXPECT_EQ(blocks[2].head, "x");
}

TEST(BlocksTest, InvalidTreesRejected) {
  auto cyc = DepTree::from_conll_heads({"a", "b", "c"}, {0, 3, 2});
  EXPECT_THROW(blocks_from_tree(cyc), TreeError);
  auto two = DepTree::from_conll_heads({"a", "b"}, {0, 0});
  EXPECT_THROW(blocks_from_tree(two), TreeError);
}

TEST(ReorderTest, GoldenPaddedString) {
  auto out = reorder_with_padding(blocks_from_tree(facing_tree()), "O", 3);
  EXPECT_EQ(join_tokens(out), kGolden);
}

TEST(ReorderTest, OneBlockAndChain) {
  auto one = blocks_from_tree(DepTree::from_conll_heads({"take", "egg"}, {0, 1}));
  EXPECT_EQ(join_tokens(reorder_with_padding(one, "O", 5)), "take egg");
  EXPECT_EQ(join_tokens(reorder_with_padding(blocks_from_tree(chain()), "O", 3)), "a b O O b c");
  EXPECT_EQ(join_tokens(reorder_with_padding(blocks_from_tree(chain()), "O", 1)), "a b b c");
  EXPECT_THROW(reorder_with_padding(one, "O", 0), std::invalid_argument);
}

// Random trees: count rule and no window of N tokens spans two blocks.
TEST(ReorderTest, WindowsNeverStraddleBlocks) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n_tok = 1 + rng() % 12, n = 1 + rng() % 5;
    std::vector<std::size_t> heads(n_tok);
    std::size_t root = rng() % n_tok;
    // Attach each node to an earlier node in a random permutation.
    std::vector<std::size_t> order(n_tok);
    for (std::size_t i = 0; i < n_tok; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::swap(*std::find(order.begin(), order.end(), root), order[0]);
    heads[root] = 0;
    for (std::size_t i = 1; i < n_tok; ++i) heads[order[i]] = order[rng() % i] + 1;
    Tokens toks;
    for (std::size_t i = 0; i < n_tok; ++i) toks.push_back("t" + std::to_string(i));
    auto blocks = blocks_from_tree(DepTree::from_conll_heads(toks, heads));
    auto out = reorder_with_padding(blocks, "O", n);

    std::size_t expected = 0;
    std::vector<std::size_t> block_of;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      expected += 1 + blocks[b].children.size();
      if (b) block_of.insert(block_of.end(), n - 1, SIZE_MAX);
      block_of.insert(block_of.end(), 1 + blocks[b].children.size(), b);
    }
    std::size_t non_pad = 0;
    for (auto& t : out) non_pad += t != "O";
    EXPECT_EQ(non_pad, expected);
    ASSERT_EQ(block_of.size(), out.size());
    for (std::size_t s = 0; s + n <= out.size(); ++s) {
      std::size_t seen = SIZE_MAX;
      for (std::size_t i = s; i < s + n; ++i) {
        if (block_of[i] == SIZE_MAX) continue;
        if (seen != SIZE_MAX) EXPECT_EQ(block_of[i], seen);
        seen = block_of[i];
      }
    }
  }
}

TEST(ReorderTrajectoryTest, MastersOnly) {
  ParseIndex parses;
  parses.add(facing_tree());
  parses.add(DepTree::from_conll_heads({"go", "north"}, {0, 1}));
  ReorderOptions opt;
  opt.n = 3;

  Trajectory t;
  t = append_and_trim(t, "go north", SentenceTag::kAction);
  t = append_and_trim(t, "You are facing the north side of a white house", SentenceTag::kMaster);
  t = append_and_trim(t, "Nothing here", SentenceTag::kMaster);
  auto r = reorder_trajectory(t, parses, opt);
  EXPECT_EQ(r.sentences[0], t.sentences[0]);
  EXPECT_EQ(join_tokens(r.sentences[1].tokens), kGolden);
  EXPECT_EQ(r.sentences[2], t.sentences[2]);

  EXPECT_EQ(reorder_trajectory(t, ParseIndex{}, opt), t);
}

TEST(ReorderTrajectoryTest, MultiSentenceMaster) {
  ParseIndex parses;
  parses.add(DepTree::from_conll_heads({"taken", "."}, {0, 1}));
  ReorderOptions opt;
  opt.n = 3;
  auto s = reorder_sentence(Sentence::make("Taken. Taken.", SentenceTag::kMaster), parses, opt);
  EXPECT_EQ(join_tokens(s.tokens), "taken . O O taken .");
}

TEST(ConlluTest, EmptyInputAndComments) {
  EXPECT_TRUE(read_conllu_string("").empty());
  auto s = read_conllu_string("# c\n1\tgo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tnorth\t_\t_\t_\t_\t1\tx\t_\t_\n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].tree.tokens, (Tokens{"go", "north"}));
}

TEST(ConlluTest, ColumnCountErrorNamesLine) {
  try {
    read_conllu_string("1\tgo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tnorth\t_\t1\n");
    FAIL() << "expected ConlluError";
  } catch (const ConlluError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ConlluTest, TreeErrors) {
  EXPECT_THROW(read_conllu_string("1\ta\t_\t_\t_\t_\t0\t_\t_\t_\n2\tb\t_\t_\t_\t_\t0\t_\t_\t_\n"),
               ConlluError);
  EXPECT_THROW(read_conllu_string("1\ta\t_\t_\t_\t_\t2\t_\t_\t_\n2\tb\t_\t_\t_\t_\t1\t_\t_\t_\n"),
               ConlluError);
  EXPECT_THROW(read_conllu_string("1\ta\t_\t_\t_\t_\t5\t_\t_\t_\n"), ConlluError);
  EXPECT_THROW(read_conllu_string("2\ta\t_\t_\t_\t_\t0\t_\t_\t_\n"), ConlluError);
}

}  // namespace
}  // namespace trajq
