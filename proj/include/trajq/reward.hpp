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

// Reward shaping: step penalty, negative-master penalty, accumulating
// repeated-bad-try penalty, then clipping.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trajq {

struct ShapingConfig {
  double step_penalty = -0.1;
  std::vector<std::string> negative_patterns{"you don't", "you can't"};
  double negative_penalty = -1.0;
  double repeat_unit = -0.1;
  // When false the tracker still counts repeats but adds no penalty.
  bool repeat_penalty_enabled = true;
  double clip_low = -1.0;
  double clip_high = 1.0;

  void validate() const {
    if (!(clip_low < clip_high)) throw std::invalid_argument("shaping: clip_low must be < clip_high");
    if (step_penalty > 0 || negative_penalty > 0 || repeat_unit > 0) {
      throw std::invalid_argument("shaping: penalties must be <= 0");
    }
  }
};

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool detect_negative_master(std::string_view text,
                                   const std::vector<std::string>& patterns) {
  const std::string lowered = to_lower(text);
  for (const auto& p : patterns) {
    if (!p.empty() && lowered.find(to_lower(p)) != std::string::npos) return true;
  }
  return false;
}

inline std::uint64_t sample_key(std::size_t action, std::string_view master) {
  std::uint64_t h = std::hash<std::string_view>{}(master);
  return h ^ (0x9e3779b97f4a7c15ULL + (std::uint64_t(action) << 6) + (h >> 2));
}

// Tracks consecutive identical (action, master) steps with negative reward.
class RepeatTracker {
 public:
  // Returns count * unit; count grows on each immediate repeat of a bad step
  // and resets otherwise. The first occurrence carries no penalty.
  double update(std::uint64_t key, double reward_so_far, double unit) {
    if (has_last_ && key == last_key_ && reward_so_far < 0.0) {
      ++count_;
    } else {
      count_ = 0;
    }
    last_key_ = key;
    has_last_ = true;
    return static_cast<double>(count_) * unit;
  }

  std::size_t count() const { return count_; }

  void reset() {
    count_ = 0;
    has_last_ = false;
  }

 private:
  std::uint64_t last_key_ = 0;
  bool has_last_ = false;
  std::size_t count_ = 0;
};

inline double update_repeat(RepeatTracker& tracker, std::uint64_t key, double reward_so_far,
                            double unit = -0.1) {
  return tracker.update(key, reward_so_far, unit);
}

inline double clip_reward(double r, double lo = -1.0, double hi = 1.0) {
  return std::clamp(r, lo, hi);
}

inline double shape_and_clip(double raw, bool negative_master, double repeat_penalty,
                             const ShapingConfig& cfg) {
  double r = raw + cfg.step_penalty + (negative_master ? cfg.negative_penalty : 0.0) +
             repeat_penalty;
  return clip_reward(r, cfg.clip_low, cfg.clip_high);
}

struct ShapedReward {
  double reward = 0.0;
  bool negative_master = false;
  // True when this step repeats the previous bad step; counted whether or
  // not the penalty is enabled.
  bool repeated_bad = false;
};

// Full per-step pipeline used by the trainer.
inline ShapedReward shape_step(double raw, std::size_t action, std::string_view master,
                               RepeatTracker& tracker, const ShapingConfig& cfg) {
  ShapedReward out;
  out.negative_master = detect_negative_master(master, cfg.negative_patterns);
  double before_repeat =
      raw + cfg.step_penalty + (out.negative_master ? cfg.negative_penalty : 0.0);
  double penalty = tracker.update(sample_key(action, master), before_repeat, cfg.repeat_unit);
  out.repeated_bad = tracker.count() > 0;
  out.reward = shape_and_clip(raw, out.negative_master,
                              cfg.repeat_penalty_enabled ? penalty : 0.0, cfg);
  return out;
}

}  // namespace trajq
