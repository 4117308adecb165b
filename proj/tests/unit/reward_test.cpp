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

#include "trajq/reward.hpp"

#include <gtest/gtest.h>

#include <random>

namespace trajq {
namespace {

TEST(NegativeMasterTest, Examples) {
  ShapingConfig c;
  EXPECT_TRUE(detect_negative_master("You can't go that way.", c.negative_patterns));
  EXPECT_FALSE(detect_negative_master("Taken.", c.negative_patterns));
  EXPECT_TRUE(detect_negative_master("YOU DON'T have that.", c.negative_patterns));
  EXPECT_FALSE(detect_negative_master("anything", {}));
}

TEST(RepeatTest, AccumulatesOnImmediateRepeats) {
  RepeatTracker t;
  const auto k = sample_key(3, "You can't go that way.");
  EXPECT_DOUBLE_EQ(update_repeat(t, k, -1.1), 0.0);
  EXPECT_DOUBLE_EQ(update_repeat(t, k, -1.1), -0.1);
  EXPECT_DOUBLE_EQ(update_repeat(t, k, -1.1), -0.2);
}

TEST(RepeatTest, ResetsOnDifferentStepOrPositiveReward) {
  RepeatTracker t;
  const auto a = sample_key(3, "You can't go that way.");
  const auto b = sample_key(4, "You can't go that way.");
  update_repeat(t, a, -1.1);
  EXPECT_DOUBLE_EQ(update_repeat(t, b, -1.1), 0.0);
  update_repeat(t, b, -1.1);
  EXPECT_EQ(t.count(), 1u);
  EXPECT_DOUBLE_EQ(update_repeat(t, b, 0.9), 0.0);
  EXPECT_EQ(t.count(), 0u);
}

TEST(ShapeTest, PipelineExamples) {
  ShapingConfig c;
  EXPECT_DOUBLE_EQ(shape_and_clip(5.0, false, 0.0, c), 1.0);
  EXPECT_DOUBLE_EQ(shape_and_clip(0.0, true, 0.0, c), -1.0);
  EXPECT_DOUBLE_EQ(shape_and_clip(0.5, false, 0.0, c), 0.5 - 0.1);
  EXPECT_DOUBLE_EQ(clip_reward(0.37), 0.37);
}

TEST(ShapeTest, StepPipelineCountsRepeatsEvenWhenDisabled) {
  ShapingConfig on, off;
  off.repeat_penalty_enabled = false;
  on.step_penalty = 0;
  off.step_penalty = 0;
  on.negative_patterns = off.negative_patterns = {};
  RepeatTracker ta, tb;
  // raw -0.5 each step: penalties 0, -0.1, -0.2 when enabled.
  double expect[] = {-0.5, -0.6, -0.7};
  for (double e : expect) {
    auto a = shape_step(-0.5, 2, "Nothing.", ta, on);
    auto b = shape_step(-0.5, 2, "Nothing.", tb, off);
    EXPECT_NEAR(a.reward, e, 1e-12);
    EXPECT_DOUBLE_EQ(b.reward, -0.5);
    EXPECT_EQ(a.repeated_bad, b.repeated_bad);
  }
  EXPECT_TRUE(shape_step(-0.5, 2, "Nothing.", ta, on).repeated_bad);
}

TEST(ShapeTest, RangeAndMonotonicity) {
  ShapingConfig c;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> raw(-20, 20), rep(-2, 0);
  for (int i = 0; i < 20000; ++i) {
    double r1 = raw(rng), r2 = raw(rng), p = rep(rng);
    bool neg = rng() % 2;
    double a = shape_and_clip(r1, neg, p, c), b = shape_and_clip(r2, neg, p, c);
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
    if (r1 <= r2) EXPECT_LE(a, b);
  }
}

TEST(ShapingConfigTest, Validation) {
  ShapingConfig c;
  c.clip_low = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ShapingConfig{};
  c.step_penalty = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace trajq
