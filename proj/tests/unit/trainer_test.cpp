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

#include "trajq/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trajq/checkpoint.hpp"
#include "test_util.hpp"

namespace trajq {
namespace {

using testing::chi_square_p;
using testing::data_path;

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.embedding_dim = 8;
  c.kernel_sizes = {2, 3};
  c.filters = 4;
  return c;
}

std::shared_ptr<const TokenIds> ids(std::vector<TokenId> v) {
  TokenIds x;
  x.ids = std::move(v);
  for (std::size_t i = 0; i < x.ids.size(); ++i) x.positions.push_back(i);
  return std::make_shared<const TokenIds>(std::move(x));
}

std::size_t action_id(const GameSpec& g, const std::string& name) {
  for (std::size_t i = 0; i < g.actions.size(); ++i)
    if (g.actions[i] == name) return i;
  throw std::invalid_argument("no action " + name);
}

TEST(EpsilonTest, LinearSchedule) {
  TrainConfig c;
  c.epsilon_decay_steps = 2000000;
  EXPECT_DOUBLE_EQ(epsilon_at(0, c), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(2000000, c), 0.0001);
  EXPECT_DOUBLE_EQ(epsilon_at(5000000, c), 0.0001);
  EXPECT_NEAR(epsilon_at(1000000, c), 0.50005, 1e-12);
}

TEST(ActTest, GreedyExploreAndTies) {
  std::mt19937_64 rng(1);
  std::vector<float> q{0.1f, 0.7f, 0.7f, -2.0f};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(act(std::span<const float>(q), 0.0, rng), 1u);
  std::vector<float> flat(11, 0.25f);
  EXPECT_EQ(act(std::span<const float>(flat), 0.0, rng), 0u);

  std::vector<std::size_t> counts(11, 0);
  bool called = false;
  auto never = [&] {
    called = true;
    return std::vector<float>(11, 0.f);
  };
  for (int i = 0; i < 100000; ++i) ++counts[act(never, 11, 1.0, rng)];
  EXPECT_FALSE(called);
  EXPECT_GT(chi_square_p(counts, std::vector<double>(11, 1.0 / 11)), 0.01);
  EXPECT_THROW(act(std::span<const float>(q), 1.5, rng), std::invalid_argument);
}

// Zero head weights and bias [0, 1]: Q(s, 0) = 0 and max Q(s') = 1 anywhere.
class TdStepTest : public ::testing::Test {
 protected:
  TdStepTest() : net_(tiny_encoder(), 10, 2, 0) {
    auto& w = net_.head_weights().value.data;
    std::fill(w.begin(), w.end(), 0.f);
    net_.head_bias().value.data = {0.f, 1.f};
    net_.mark_updated();
  }
  Network net_;
  AdamState<float> adam_;
};

TEST_F(TdStepTest, NonTerminalHuberExample) {
  ReplaySample s{ids({3, 4}), 0, 0.0, ids({5}), false, 1.0};
  const ReplaySample* batch[] = {&s};
  std::vector<double> scales{1.0};
  auto r = td_step(net_, batch, 0.95, scales, adam_, 1e-5);
  ASSERT_EQ(r.deltas.size(), 1u);
  EXPECT_NEAR(r.deltas[0], -0.95, 1e-6);
  EXPECT_NEAR(r.loss, 0.45125, 1e-6);
  EXPECT_EQ(adam_.step, 1u);
}

TEST_F(TdStepTest, TerminalSampleNeverBootstraps) {
  ReplaySample s{ids({3, 4}), 1, 1.0, ids({5}), true, 1.0};
  const ReplaySample* batch[] = {&s};
  std::vector<double> scales{1.0};
  auto r = td_step(net_, batch, 0.95, scales, adam_, 1e-5);
  EXPECT_NEAR(r.deltas[0], 0.0, 1e-7);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST_F(TdStepTest, ZeroScalesLeaveParametersUnchanged) {
  std::vector<std::vector<float>> before;
  for (auto* p : net_.params()) before.push_back(p->value.data);
  ReplaySample a{ids({3, 4}), 0, -0.5, ids({5}), false, 1.0};
  ReplaySample b{ids({6}), 1, 0.3, ids({7, 8}), true, 1.0};
  const ReplaySample* batch[] = {&a, &b};
  std::vector<double> scales{0.0, 0.0};
  td_step(net_, batch, 0.95, scales, adam_, 1e-2);
  auto ps = net_.params();
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i]->value.data, before[i]) << ps[i]->name;
}

TEST_F(TdStepTest, EmptyBatchRejected) {
  std::vector<const ReplaySample*> none;
  EXPECT_THROW(td_step(net_, none, 0.95, {}, adam_, 1e-5), std::invalid_argument);
}

TEST(TrainConfigTest, PresetsAndValidation) {
  auto egg = TrainConfig::egg();
  EXPECT_EQ(egg.observation_steps, 5000u);
  EXPECT_EQ(egg.replay_capacity, 50000u);
  EXPECT_EQ(egg.epsilon_decay_steps, 500000u);
  EXPECT_EQ(egg.episode_step_cap, 100u);
  EXPECT_EQ(egg.eval_period, 5000u);
  EXPECT_EQ(egg.eval_episodes, 10u);
  EXPECT_DOUBLE_EQ(egg.eval_epsilon, 0.05);
  auto troll = TrainConfig::troll();
  EXPECT_EQ(troll.observation_steps, 2 * egg.observation_steps);
  EXPECT_EQ(troll.replay_capacity, 2 * egg.replay_capacity);
  EXPECT_EQ(troll.epsilon_decay_steps, 2 * egg.epsilon_decay_steps);
  EXPECT_EQ(troll.episode_step_cap, 150u);
  auto bad = egg;
  bad.observation_steps = bad.epsilon_decay_steps + 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = egg;
  bad.gamma = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = egg;
  bad.batch_size = bad.replay_capacity + 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(EvaluateTest, ScriptedOptimalEggPolicy) {
  auto spec = load_game_file(data_path("games/egg.json"));
  StateBuilder builder(spec, 21, 1024);
  std::vector<std::size_t> plan{action_id(spec, "go north"), action_id(spec, "go north"),
                                action_id(spec, "climb tree"), action_id(spec, "take the egg")};
  Policy optimal = [&](const TokenIds&, std::size_t t, std::mt19937_64&) {
    return plan.at(t);
  };
  auto rep = evaluate_policy(optimal, spec, builder, 10, 3, 100);
  ASSERT_EQ(rep.scores.size(), 10u);
  for (double s : rep.scores) EXPECT_EQ(s, 5.0);
  EXPECT_EQ(rep.mean_score, 5.0);
  EXPECT_EQ(rep.steps, 40u);
}

TEST(EvaluateTest, MeanOfScoresAndShapeChecks) {
  auto spec = load_game_file(data_path("games/egg.json"));
  StateBuilder builder(spec, 21, 1024);
  auto take = action_id(spec, "take the egg");
  // Waiting never scores; the mean is over all episodes.
  Policy idle = [&](const TokenIds&, std::size_t, std::mt19937_64&) { return take; };
  auto rep = evaluate_policy(idle, spec, builder, 4, 0, 7);
  EXPECT_EQ(rep.mean_score, 0.0);
  EXPECT_EQ(rep.steps, 28u);
  EXPECT_GT(rep.repeat_bad_rate, 0.5);

  Network wrong_actions(tiny_encoder(), builder.vocab().size(), 5, 0);
  EXPECT_THROW(evaluate(wrong_actions, spec, builder, 1, 0.0, 0, 10), ShapeError);
  Network wrong_vocab(tiny_encoder(), builder.vocab().size() + 1, spec.action_count(), 0);
  EXPECT_THROW(evaluate(wrong_vocab, spec, builder, 1, 0.0, 0, 10), ShapeError);
}

TEST(StateBuilderTest, ReordersMastersWhenParsesGiven) {
  auto spec = load_game_file(data_path("games/egg.json"));
  auto parses = std::make_shared<ParseIndex>();
  parses->add(DepTree::from_conll_heads({"taken", "."}, {0, 1}));
  ReorderOptions opt;
  opt.n = 3;
  StateBuilder plain(spec, 21, 1024), reordered(spec, 21, 1024, parses, opt);
  plain.reset("Taken. Taken.");
  reordered.reset("Taken. Taken.");
  EXPECT_EQ(plain.ids()->size(), 4u);
  EXPECT_EQ(reordered.ids()->size(), 6u);
  EXPECT_EQ(reordered.ids()->ids[2], reordered.vocab().pad_id());
}

TrainConfig short_run(std::uint64_t seed) {
  TrainConfig c = TrainConfig::egg();
  c.observation_steps = 300;
  c.replay_capacity = 2000;
  c.epsilon_decay_steps = 3000;
  c.eval_period = 500;
  c.eval_episodes = 2;
  c.batch_size = 8;
  c.total_steps = 1500;
  c.seed = seed;
  return c;
}

std::string run_metrics(const TrainConfig& cfg, const std::string& ckpt_dir = "") {
  auto spec = load_game_file(data_path("games/egg.json"));
  StateBuilder builder(spec, cfg.max_sentences, 1024);
  std::ostringstream out;
  TrainHooks hooks;
  hooks.metrics = &out;
  hooks.checkpoint_dir = ckpt_dir;
  run_training(spec, cfg, tiny_encoder(), ShapingConfig{}, builder, hooks);
  return out.str();
}

TEST(RunTrainingTest, SameSeedSameMetrics) {
  auto a = run_metrics(short_run(4)), b = run_metrics(short_run(4));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, run_metrics(short_run(5)));

  std::istringstream lines(a);
  std::string line;
  std::size_t evals = 0;
  std::uint64_t last_step = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_GE(j["step"].get<std::uint64_t>(), last_step);
    last_step = j["step"];
    if (!j["eval_mean_score"].is_null()) ++evals;
    if (j["step"].get<std::uint64_t>() <= 300) EXPECT_TRUE(j["loss"].is_null());
  }
  EXPECT_EQ(evals, 3u);
}

TEST(RunTrainingTest, WritesCheckpointsEveryEvalPeriod) {
  auto dir = std::filesystem::temp_directory_path() / "trajq_trainer_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  run_metrics(short_run(1), dir.string());
  for (int step : {500, 1000, 1500}) {
    auto path = dir / ("ckpt-" + std::to_string(step) + ".bin");
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(load_checkpoint(path.string()).global_step, std::uint64_t(step));
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(run_metrics(short_run(1), (dir / "missing" / "deeper").string()),
               std::runtime_error);
}

TEST(CheckpointTest, RoundTripIsBitwise) {
  Network net(tiny_encoder(), 12, 3, 9);
  AdamState<float> adam;
  {
    ReplaySample s{ids({3, 4}), 1, 0.5, ids({5}), false, 1.0};
    const ReplaySample* batch[] = {&s};
    std::vector<double> scales{1.0};
    td_step(net, batch, 0.95, scales, adam, 1e-3);
  }
  std::mt19937_64 rng(77);
  rng.discard(1234);
  auto ck = make_checkpoint(net, &adam, 4242, rng);
  auto bytes = serialize_checkpoint(ck);
  auto back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.global_step, 4242u);

  Network loaded = network_from_checkpoint(back);
  std::vector<std::shared_ptr<const TokenIds>> probe{ids({3}), ids({4, 5, 6, 7}),
                                                     ids({11, 0, 2, 9, 9, 1})};
  for (const auto& x : probe) EXPECT_EQ(loaded.q_values(*x), net.q_values(*x));

  AdamState<float> adam2;
  load_adam(back, loaded, adam2);
  EXPECT_EQ(adam2.step, adam.step);
  EXPECT_EQ(adam2.m, adam.m);
  EXPECT_EQ(adam2.v, adam.v);

  std::mt19937_64 rng2;
  restore_rng(rng2, back.rng_state);
  EXPECT_EQ(rng2(), rng());

  auto path = (std::filesystem::temp_directory_path() / "trajq_ck.bin").string();
  save_checkpoint(path, ck);
  auto again = (std::filesystem::temp_directory_path() / "trajq_ck2.bin").string();
  save_checkpoint(again, load_checkpoint(path));
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  std::string ab((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(ab, bb);
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST(CheckpointTest, CorruptAndMismatchedRejected) {
  Network net(tiny_encoder(), 12, 3, 9);
  std::mt19937_64 rng(1);
  auto bytes = serialize_checkpoint(make_checkpoint(net, nullptr, 1, rng));
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2}) {
    try {
      parse_checkpoint(std::string_view(bytes).substr(0, cut));
      FAIL() << "truncation at " << cut << " accepted";
    } catch (const CheckpointError& e) {
      EXPECT_NE(std::string(e.what()).find("corrupt checkpoint"), std::string::npos);
    }
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);

  auto ck = parse_checkpoint(bytes);
  Network other(tiny_encoder(), 12, 4, 9);
  EXPECT_THROW(load_into(ck, other), ShapeError);
}

TEST(DeriveSeedTest, DistinctStreams) {
  EXPECT_EQ(derive_seed(3, 1), derive_seed(3, 1));
  EXPECT_NE(derive_seed(3, 1), derive_seed(3, 2));
  EXPECT_NE(derive_seed(3, 1), derive_seed(4, 1));
}

}  // namespace
}  // namespace trajq
