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

// Run configuration: one JSON document, optionally patched with flat dotted
// overrides such as "train.total_steps=20000".
//
//   {
//     "game": "games/egg.json",
//     "output_dir": "out/egg",
//     "seed": 0,
//     "encoder": {"pooling": "max", "position_embeddings": true, ...},
//     "train": {"preset": "egg", "sampler": "fixed_weight", ...},
//     "shaping": {"repeat_penalty": true, ...},
//     "reorder": {"enabled": false, "parses": "masters.conllu", "n": 5}
//   }
//
// Relative paths are taken from the working directory.

#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajq/dep_reorder.hpp"
#include "trajq/encoder.hpp"
#include "trajq/replay.hpp"
#include "trajq/reward.hpp"
#include "trajq/trainer.hpp"

namespace trajq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string game;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  EncoderConfig encoder;
  TrainConfig train;
  ShapingConfig shaping;
  bool reorder = false;
  std::string parses;
  std::size_t reorder_n = 0;  // 0 means the largest kernel size
};

// Applies "a.b.c=value"; the value is parsed as JSON and falls back to a
// plain string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    auto dot = key.find('.', start);
    if (dot == std::string::npos) dot = key.size();
    pointer += "/" + key.substr(start, dot - start);
    start = dot + 1;
  }
  doc[nlohmann::json::json_pointer(pointer)] = value;
}

inline RunConfig parse_run_config(const nlohmann::json& doc) {
  RunConfig rc;
  try {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    rc.game = doc.at("game").get<std::string>();
    rc.output_dir = doc.value("output_dir", rc.output_dir);
    rc.seed = doc.value("seed", rc.seed);

    if (doc.contains("encoder")) {
      const auto& e = doc.at("encoder");
      auto& c = rc.encoder;
      c.embedding_dim = e.value("embedding_dim", c.embedding_dim);
      c.kernel_sizes = e.value("kernel_sizes", c.kernel_sizes);
      c.filters = e.value("filters", c.filters);
      if (e.contains("pooling")) c.pooling = parse_pool(e.at("pooling").get<std::string>());
      c.position_embeddings = e.value("position_embeddings", c.position_embeddings);
      if (e.contains("kind")) c.kind = parse_encoder_kind(e.at("kind").get<std::string>());
      c.token_cap = e.value("token_cap", c.token_cap);
      c.lstm_hidden = e.value("lstm_hidden", c.lstm_hidden);
      c.relu = e.value("relu", c.relu);
    }

    nlohmann::json t = doc.value("train", nlohmann::json::object());
    std::string preset = t.value("preset", std::string("egg"));
    if (preset == "egg") {
      rc.train = TrainConfig::egg();
    } else if (preset == "troll") {
      rc.train = TrainConfig::troll();
    } else {
      throw ConfigError("unknown train preset '" + preset + "'");
    }
    auto& c = rc.train;
    c.observation_steps = t.value("observation_steps", c.observation_steps);
    c.replay_capacity = t.value("replay_capacity", c.replay_capacity);
    c.epsilon_start = t.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = t.value("epsilon_end", c.epsilon_end);
    c.epsilon_decay_steps = t.value("epsilon_decay_steps", c.epsilon_decay_steps);
    c.episode_step_cap = t.value("episode_step_cap", c.episode_step_cap);
    c.eval_period = t.value("eval_period", c.eval_period);
    c.eval_episodes = t.value("eval_episodes", c.eval_episodes);
    c.eval_epsilon = t.value("eval_epsilon", c.eval_epsilon);
    c.gamma = t.value("gamma", c.gamma);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    if (t.contains("sampler")) c.sampler = parse_sampler(t.at("sampler").get<std::string>());
    if (t.contains("per")) {
      const auto& p = t.at("per");
      c.per.a = p.value("a", c.per.a);
      c.per.e = p.value("e", c.per.e);
      c.per.b_start = p.value("b_start", c.per.b_start);
      c.per.b_end = p.value("b_end", c.per.b_end);
    }
    c.target_network = t.value("target_network", c.target_network);
    c.target_sync_period = t.value("target_sync_period", c.target_sync_period);
    c.total_steps = t.value("total_steps", c.total_steps);
    c.max_sentences = t.value("max_sentences", c.max_sentences);
    c.keep_checkpoints = t.value("keep_checkpoints", c.keep_checkpoints);
    c.seed = rc.seed;

    if (doc.contains("shaping")) {
      const auto& s = doc.at("shaping");
      auto& sc = rc.shaping;
      sc.step_penalty = s.value("step_penalty", sc.step_penalty);
      sc.negative_patterns = s.value("negative_patterns", sc.negative_patterns);
      sc.negative_penalty = s.value("negative_penalty", sc.negative_penalty);
      sc.repeat_unit = s.value("repeat_unit", sc.repeat_unit);
      sc.repeat_penalty_enabled = s.value("repeat_penalty", sc.repeat_penalty_enabled);
      sc.clip_low = s.value("clip_low", sc.clip_low);
      sc.clip_high = s.value("clip_high", sc.clip_high);
    }

    if (doc.contains("reorder")) {
      const auto& r = doc.at("reorder");
      rc.reorder = r.value("enabled", false);
      rc.parses = r.value("parses", std::string());
      rc.reorder_n = r.value("n", std::size_t{0});
      if (rc.reorder && rc.parses.empty()) {
        throw ConfigError("reorder.enabled requires reorder.parses");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    rc.encoder.validate();
    rc.train.validate();
    rc.shaping.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
  return doc;
}

inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  auto doc = read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_run_config(doc);
}

}  // namespace trajq
