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

#include "trajq/game.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace trajq {
namespace {

using testing::chi_square_p;
using testing::data_path;

std::size_t action_id(const GameSpec& g, const std::string& name) {
  for (std::size_t i = 0; i < g.actions.size(); ++i)
    if (g.actions[i] == name) return i;
  ADD_FAILURE() << "no action " << name;
  return 0;
}

nlohmann::json tiny_game() {
  return nlohmann::json::parse(R"({
    "actions": ["wait", "flip"],
    "initial_state": "a",
    "initial_master": "Start.",
    "states": {"a": {"terminal": false}, "b": {"terminal": false}, "end": {"terminal": true}},
    "transitions": [
      {"state": "a", "action": "flip", "branches": [
        {"p": 0.7, "next": "b", "master": "Heads.", "reward": 1},
        {"p": 0.3, "next": "a", "master": "Tails.", "reward": 0}]},
      {"state": "b", "action": 0, "branches": [
        {"p": 1.0, "next": "end", "master": "Done.", "reward": 2}]}
    ]})");
}

TEST(GameTest, BundledCatalogSizes) {
  EXPECT_EQ(load_game_file(data_path("games/egg.json")).action_count(), 11u);
  EXPECT_EQ(load_game_file(data_path("games/troll.json")).action_count(), 21u);
}

TEST(GameTest, ProbabilitySumErrorNamesEntry) {
  auto doc = tiny_game();
  doc["transitions"][0]["branches"][1]["p"] = 0.2;
  try {
    load_game(doc);
    FAIL() << "expected GameSpecError";
  } catch (const GameSpecError& e) {
    EXPECT_NE(std::string(e.what()).find("(a, flip)"), std::string::npos) << e.what();
  }
}

TEST(GameTest, DanglingStateRejected) {
  auto doc = tiny_game();
  doc["transitions"][1]["branches"][0]["next"] = "nowhere";
  EXPECT_THROW(load_game(doc), GameSpecError);
}

TEST(GameTest, MissingFieldAndBadInitialRejected) {
  auto doc = tiny_game();
  doc.erase("actions");
  EXPECT_THROW(load_game(doc), GameSpecError);
  doc = tiny_game();
  doc["initial_state"] = "end";
  EXPECT_THROW(load_game(doc), GameSpecError);
  doc = tiny_game();
  doc["transitions"][0]["action"] = 7;
  EXPECT_THROW(load_game(doc), GameSpecError);
  EXPECT_THROW(load_game_file(data_path("games/missing.json")), GameSpecError);
}

TEST(GameTest, ResetEmitsInitialMaster) {
  auto g = load_game_file(data_path("games/egg.json"));
  auto [h, master] = reset(g, 3);
  EXPECT_EQ(master.rfind("West of House You are standing in an open field", 0), 0u);
  EXPECT_EQ(h.moves(), 0u);
  EXPECT_EQ(h.score(), 0.0);
}

TEST(GameTest, EggWalkthrough) {
  auto g = load_game_file(data_path("games/egg.json"));
  auto [h, master] = reset(g, 0);
  auto r = h.step(action_id(g, "go north"));
  EXPECT_EQ(r.master.rfind("North of House You are facing the north side", 0), 0u);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.moves, 1u);
  h.step(action_id(g, "go north"));
  h.step(action_id(g, "climb tree"));
  EXPECT_EQ(h.state_name(), "up_a_tree");
  r = h.step(action_id(g, "take the egg"));
  EXPECT_EQ(r.master, "Taken.");
  EXPECT_EQ(r.reward, 5.0);
  EXPECT_TRUE(r.terminal);
  EXPECT_EQ(h.score(), 5.0);
  EXPECT_EQ(h.moves(), 4u);
  EXPECT_THROW(h.step(0), EpisodeError);
}

TEST(GameTest, UndeclaredPairSelfLoops) {
  auto g = load_game(tiny_game());
  auto [h, m] = reset(g, 0);
  auto r = h.step(0);
  EXPECT_EQ(r.master, "You can't do that.");
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(h.state_name(), "a");
  EXPECT_THROW(h.step(2), EpisodeError);
}

TEST(GameTest, SameSeedSameDraws) {
  auto g = load_game(tiny_game());
  for (std::uint64_t seed : {1u, 99u}) {
    auto [a, ma] = reset(g, seed);
    auto [b, mb] = reset(g, seed);
    for (int i = 0; i < 50 && !a.terminated(); ++i) {
      auto ra = a.step(1 - a.state() % 2);
      auto rb = b.step(1 - b.state() % 2);
      EXPECT_EQ(ra.master, rb.master);
      EXPECT_EQ(ra.reward, rb.reward);
    }
  }
}

TEST(GameTest, BranchFrequenciesMatchDeclared) {
  auto g = load_game(tiny_game());
  std::vector<std::size_t> counts(2, 0);
  std::mt19937_64 seeds(5);
  for (int i = 0; i < 100000; ++i) {
    EpisodeHandle h(g, seeds());
    auto r = h.step(1);
    ++counts[r.master == "Heads." ? 0 : 1];
  }
  EXPECT_GT(chi_square_p(counts, {0.7, 0.3}), 0.01);
}

TEST(GameTest, TrollFightBranches) {
  auto g = load_game_file(data_path("games/troll.json"));
  std::size_t kill = action_id(g, "kill troll with sword");
  std::size_t fights = 0;
  for (std::size_t s = 0; s < g.state_count(); ++s) {
    const auto& bs = g.branches(s, kill);
    if (bs.size() != 2) continue;
    ++fights;
    EXPECT_DOUBLE_EQ(bs[0].probability + bs[1].probability, 1.0);
    bool has_death = g.terminal[bs[0].next] || g.terminal[bs[1].next];
    EXPECT_TRUE(has_death);
  }
  EXPECT_GT(fights, 0u);
}

TEST(GameTest, RewardsSumToScore) {
  auto g = load_game_file(data_path("games/troll.json"));
  std::mt19937_64 rng(11);
  for (int ep = 0; ep < 200; ++ep) {
    auto [h, m] = reset(g, rng());
    double total = 0;
    for (int t = 0; t < 150 && !h.terminated(); ++t)
      total += h.step(std::uniform_int_distribution<std::size_t>(0, 20)(rng)).reward;
    EXPECT_DOUBLE_EQ(total, h.score());
  }
}

}  // namespace
}  // namespace trajq
