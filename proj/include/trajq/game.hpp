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

// Scriptable text games as stochastic finite-state transducers.
//
// A game document is JSON:
//   {
//     "actions": ["go north", ...],
//     "initial_state": "west_of_house",
//     "initial_master": "West of House ...",
//     "default_failure_master": "You can't do that.",
//     "states": {"west_of_house": {"terminal": false}, ...},
//     "transitions": [
//       {"state": "west_of_house", "action": "go north",
//        "branches": [{"p": 1.0, "next": "north_of_house",
//                      "master": "North of House ...", "reward": 0}]}
//     ]
//   }
// "action" may be the catalog string or its index. A (state, action) pair
// with no entry loops back to the same state with the failure master and no
// reward.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace trajq {

class GameSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EpisodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Branch {
  double probability = 1.0;
  std::size_t next = 0;
  std::string master;
  double reward = 0.0;
};

struct GameSpec {
  std::vector<std::string> states;
  std::vector<bool> terminal;
  std::vector<std::string> actions;
  std::size_t initial_state = 0;
  std::string initial_master;
  std::string default_failure_master = "You can't do that.";
  // Indexed state * |actions| + action; empty means undeclared.
  std::vector<std::vector<Branch>> transitions;

  std::size_t action_count() const { return actions.size(); }
  std::size_t state_count() const { return states.size(); }

  const std::vector<Branch>& branches(std::size_t state, std::size_t action) const {
    return transitions[state * actions.size() + action];
  }

  std::size_t state_index(const std::string& name) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == name) return i;
    throw GameSpecError("unknown state '" + name + "'");
  }

  // Every text the game can emit, in a stable order.
  std::vector<std::string> texts() const {
    std::vector<std::string> out{initial_master, default_failure_master};
    out.insert(out.end(), actions.begin(), actions.end());
    for (const auto& bs : transitions)
      for (const auto& b : bs) out.push_back(b.master);
    return out;
  }
};

inline GameSpec load_game(const nlohmann::json& doc) {
  auto need = [&](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      throw GameSpecError(where + ": missing field '" + key + "'");
    }
    return obj.at(key);
  };
  GameSpec g;
  try {
    for (const auto& a : need(doc, "actions", "game")) g.actions.push_back(a.get<std::string>());
    if (g.actions.empty()) throw GameSpecError("game: action catalog is empty");
    std::unordered_map<std::string, std::size_t> action_ids;
    for (std::size_t i = 0; i < g.actions.size(); ++i) {
      if (!action_ids.emplace(g.actions[i], i).second) {
        throw GameSpecError("game: duplicate action '" + g.actions[i] + "'");
      }
    }

    std::unordered_map<std::string, std::size_t> state_ids;
    const nlohmann::json states = need(doc, "states", "game");
    for (const auto& [name, info] : states.items()) {
      state_ids.emplace(name, g.states.size());
      g.states.push_back(name);
      g.terminal.push_back(info.is_object() && info.value("terminal", false));
    }
    if (g.states.empty()) throw GameSpecError("game: no states declared");

    auto initial = need(doc, "initial_state", "game").get<std::string>();
    auto it = state_ids.find(initial);
    if (it == state_ids.end()) {
      throw GameSpecError("game: initial_state '" + initial + "' is not a declared state");
    }
    g.initial_state = it->second;
    if (g.terminal[g.initial_state]) {
      throw GameSpecError("game: initial_state '" + initial + "' is terminal");
    }
    g.initial_master = need(doc, "initial_master", "game").get<std::string>();
    if (doc.contains("default_failure_master")) {
      g.default_failure_master = doc.at("default_failure_master").get<std::string>();
    }

    g.transitions.assign(g.states.size() * g.actions.size(), {});
    std::size_t entry = 0;
    for (const auto& tr : need(doc, "transitions", "game")) {
      std::string where = "transitions[" + std::to_string(entry++) + "]";
      auto sname = need(tr, "state", where).get<std::string>();
      auto sit = state_ids.find(sname);
      if (sit == state_ids.end()) {
        throw GameSpecError(where + ": unknown state '" + sname + "'");
      }
      const auto& aj = need(tr, "action", where);
      std::size_t aid = 0;
      std::string aname;
      if (aj.is_number_integer()) {
        auto v = aj.get<std::int64_t>();
        if (v < 0 || std::size_t(v) >= g.actions.size()) {
          throw GameSpecError(where + ": action id " + std::to_string(v) + " out of range");
        }
        aid = std::size_t(v);
        aname = g.actions[aid];
      } else {
        aname = aj.get<std::string>();
        auto ait = action_ids.find(aname);
        if (ait == action_ids.end()) {
          throw GameSpecError(where + ": unknown action '" + aname + "'");
        }
        aid = ait->second;
      }
      where += " (" + sname + ", " + aname + ")";
      auto& slot = g.transitions[sit->second * g.actions.size() + aid];
      if (!slot.empty()) throw GameSpecError(where + ": duplicate transition");
      double total = 0.0;
      for (const auto& bj : need(tr, "branches", where)) {
        Branch b;
        b.probability = need(bj, "p", where).get<double>();
        if (!(b.probability >= 0.0 && b.probability <= 1.0)) {
          throw GameSpecError(where + ": branch probability outside [0, 1]");
        }
        auto next = need(bj, "next", where).get<std::string>();
        auto nit = state_ids.find(next);
        if (nit == state_ids.end()) {
          throw GameSpecError(where + ": dangling next state '" + next + "'");
        }
        b.next = nit->second;
        b.master = need(bj, "master", where).get<std::string>();
        b.reward = bj.value("reward", 0.0);
        total += b.probability;
        slot.push_back(std::move(b));
      }
      if (slot.empty()) throw GameSpecError(where + ": no branches");
      if (std::abs(total - 1.0) > 1e-9) {
        throw GameSpecError(where + ": branch probabilities sum to " + std::to_string(total));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw GameSpecError(std::string("game: malformed document: ") + e.what());
  }
  return g;
}

inline GameSpec load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GameSpecError("cannot open game file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw GameSpecError(path + ": " + e.what());
  }
  return load_game(doc);
}

struct StepResult {
  std::string master;
  double reward = 0.0;
  bool terminal = false;
  std::size_t moves = 0;
};

// One play-through. Single owner; the GameSpec must outlive the handle.
class EpisodeHandle {
 public:
  EpisodeHandle(const GameSpec& spec, std::uint64_t seed)
      : spec_(&spec), state_(spec.initial_state), rng_(seed) {}

  const GameSpec& spec() const { return *spec_; }
  std::size_t state() const { return state_; }
  const std::string& state_name() const { return spec_->states[state_]; }
  double score() const { return score_; }
  std::size_t moves() const { return moves_; }
  bool terminated() const { return terminated_; }

  StepResult step(std::size_t action) {
    if (terminated_) throw EpisodeError("step on a terminated episode");
    if (action >= spec_->action_count()) {
      throw EpisodeError("action id " + std::to_string(action) + " out of range (catalog has " +
                         std::to_string(spec_->action_count()) + " actions)");
    }
    StepResult r;
    const auto& bs = spec_->branches(state_, action);
    if (bs.empty()) {
      r.master = spec_->default_failure_master;
    } else {
      const Branch* chosen = &bs.back();
      if (bs.size() > 1) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        double acc = 0.0;
        for (const auto& b : bs) {
          acc += b.probability;
          if (u < acc) {
            chosen = &b;
            break;
          }
        }
      } else {
        chosen = &bs.front();
      }
      state_ = chosen->next;
      r.master = chosen->master;
      r.reward = chosen->reward;
    }
    score_ += r.reward;
    ++moves_;
    terminated_ = spec_->terminal[state_];
    r.terminal = terminated_;
    r.moves = moves_;
    return r;
  }

 private:
  const GameSpec* spec_;
  std::size_t state_;
  double score_ = 0.0;
  std::size_t moves_ = 0;
  bool terminated_ = false;
  std::mt19937_64 rng_;
};

inline std::pair<EpisodeHandle, std::string> reset(const GameSpec& spec, std::uint64_t seed) {
  return {EpisodeHandle(spec, seed), spec.initial_master};
}

inline StepResult step(EpisodeHandle& handle, std::size_t action) {
  return handle.step(action);
}

}  // namespace trajq
