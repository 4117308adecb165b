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

// Epsilon-greedy DQN training loop.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajq/adam.hpp"
#include "trajq/checkpoint.hpp"
#include "trajq/dep_reorder.hpp"
#include "trajq/encoder.hpp"
#include "trajq/game.hpp"
#include "trajq/ops.hpp"
#include "trajq/replay.hpp"
#include "trajq/reward.hpp"
#include "trajq/tape.hpp"
#include "trajq/trajectory.hpp"

namespace trajq {

using Network = QNetwork<float>;

struct TrainConfig {
  std::uint64_t observation_steps = 5000;
  std::size_t replay_capacity = 50000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.0001;
  std::uint64_t epsilon_decay_steps = 500000;
  std::size_t episode_step_cap = 100;
  std::uint64_t eval_period = 5000;
  std::size_t eval_episodes = 10;
  double eval_epsilon = 0.05;
  double gamma = 0.95;
  std::size_t batch_size = 32;
  double learning_rate = 1e-5;
  SamplerKind sampler = SamplerKind::kFixedWeight;
  PerConfig per;
  bool target_network = false;
  std::uint64_t target_sync_period = 5000;
  std::uint64_t seed = 0;
  std::uint64_t total_steps = 300000;
  std::size_t max_sentences = 21;
  // Older checkpoints beyond this many are deleted; 0 keeps all of them.
  std::size_t keep_checkpoints = 0;

  void validate() const {
    if (observation_steps > epsilon_decay_steps) {
      throw std::invalid_argument("train: observation_steps exceeds epsilon_decay_steps");
    }
    if (batch_size == 0 || batch_size > replay_capacity) {
      throw std::invalid_argument("train: batch_size must lie in [1, replay_capacity]");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("train: gamma must be in (0, 1]");
    if (episode_step_cap == 0) throw std::invalid_argument("train: episode_step_cap must be > 0");
    if (eval_period == 0) throw std::invalid_argument("train: eval_period must be > 0");
    if (target_network && target_sync_period == 0) {
      throw std::invalid_argument("train: target_sync_period must be > 0");
    }
    if (!(epsilon_start >= 0 && epsilon_start <= 1 && epsilon_end >= 0 && epsilon_end <= 1)) {
      throw std::invalid_argument("train: epsilon bounds must lie in [0, 1]");
    }
    if (max_sentences == 0) throw std::invalid_argument("train: max_sentences must be > 0");
    per.validate();
  }

  static TrainConfig egg() { return TrainConfig{}; }

  static TrainConfig troll() {
    TrainConfig c;
    c.observation_steps = 10000;
    c.replay_capacity = 100000;
    c.epsilon_decay_steps = 1000000;
    c.episode_step_cap = 150;
    c.total_steps = 1000000;
    return c;
  }
};

inline double epsilon_at(std::uint64_t step, const TrainConfig& cfg) {
  if (cfg.epsilon_decay_steps == 0 || step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
  double frac = double(step) / double(cfg.epsilon_decay_steps);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

// Explores with probability epsilon, else takes the lowest-index argmax.
// `q` is only evaluated when exploiting.
template <class Rng, class QFn>
std::size_t act(QFn&& q, std::size_t num_actions, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("act: epsilon outside [0, 1]");
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < epsilon) return std::uniform_int_distribution<std::size_t>(0, num_actions - 1)(rng);
  const auto values = q();
  return argmax_lowest<float>(values);
}

template <class Rng>
std::size_t act(std::span<const float> q, double epsilon, Rng& rng) {
  return act([&] { return std::vector<float>(q.begin(), q.end()); }, q.size(), epsilon, rng);
}

struct TdResult {
  double loss = 0.0;
  std::vector<double> deltas;
};

// One TD update over `batch`. Bootstrap values come from `target` when given,
// otherwise from `net` and are treated as constants.
inline TdResult td_step(Network& net, std::span<const ReplaySample* const> batch,
                        double gamma, std::span<const double> scales,
                        AdamState<float>& adam, double lr, Network* target = nullptr) {
  if (batch.empty()) throw std::invalid_argument("td_step: empty batch");
  if (scales.size() != batch.size()) {
    throw std::invalid_argument("td_step: one importance scale per sample required");
  }
  const std::size_t n = batch.size(), na = net.num_actions();

  std::vector<const TokenIds*> next;
  std::vector<std::size_t> next_of(n, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    if (!batch[i]->terminal) {
      next_of[i] = next.size();
      next.push_back(batch[i]->next_state.get());
    }
  }
  std::vector<float> qn;
  if (!next.empty()) qn = (target ? *target : net).q_values_batch(next);
  std::vector<float> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = batch[i]->reward;
    if (next_of[i] != SIZE_MAX) {
      const float* row = qn.data() + next_of[i] * na;
      t += gamma * double(*std::max_element(row, row + na));
    }
    y[i] = float(t);
  }

  Tape<float> tape;
  std::vector<const TokenIds*> states;
  std::vector<std::size_t> actions;
  for (const auto* s : batch) {
    states.push_back(s->state.get());
    actions.push_back(s->action);
  }
  Var q = net.forward(tape, states);
  Var qa = ops::select_cols(tape, q, actions);
  Var delta = ops::sub(tape, qa, tape.constant({n}, y));
  Var h = ops::huber(tape, delta);
  std::vector<float> w(scales.begin(), scales.end());
  Var loss = ops::weighted_mean<float>(tape, h, w);

  TdResult res;
  res.loss = tape.scalar(loss);
  for (float d : tape.value(delta)) res.deltas.push_back(d);
  tape.backward(loss);
  auto params = net.params();
  adam_step<float>(params, lr, adam);
  net.mark_updated();
  return res;
}

// Owns the vocabulary and turns game text into encoder inputs. Masters are
// reordered at ingestion when parses are supplied.
class StateBuilder {
 public:
  StateBuilder(const GameSpec& spec, std::size_t max_sentences, std::size_t token_cap,
               std::shared_ptr<const ParseIndex> parses = nullptr, ReorderOptions reorder = {})
      : max_sentences_(max_sentences),
        token_cap_(token_cap),
        parses_(std::move(parses)),
        reorder_(std::move(reorder)) {
    for (const auto& t : spec.texts()) vocab_.add_text(t);
    if (parses_)
      for (const auto& t : parses_->tokens()) vocab_.add(t);
    traj_.max_sentences = max_sentences_;
  }

  const Vocab& vocab() const { return vocab_; }
  const Trajectory& trajectory() const { return traj_; }
  bool reorders() const { return parses_ != nullptr; }

  void reset(const std::string& initial_master) {
    traj_ = Trajectory{};
    traj_.max_sentences = max_sentences_;
    push(initial_master, SentenceTag::kMaster);
  }

  void push(const std::string& text, SentenceTag tag) {
    Sentence s = Sentence::make(text, tag);
    if (parses_) s = reorder_sentence(std::move(s), *parses_, reorder_);
    traj_ = append_and_trim(std::move(traj_), std::move(s));
  }

  std::shared_ptr<const TokenIds> ids() const {
    return std::make_shared<const TokenIds>(to_ids(traj_, vocab_, token_cap_));
  }

 private:
  std::size_t max_sentences_;
  std::size_t token_cap_;
  std::shared_ptr<const ParseIndex> parses_;
  ReorderOptions reorder_;
  Vocab vocab_;
  Trajectory traj_;
};

struct EvalReport {
  std::vector<double> scores;
  double mean_score = 0.0;
  std::size_t steps = 0;
  double repeat_bad_rate = 0.0;
};

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"scores", r.scores},
          {"mean_score", r.mean_score},
          {"steps", r.steps},
          {"repeat_bad_rate", r.repeat_bad_rate}};
}

// Chooses an action from the encoded state and the step index within the
// current episode.
using Policy = std::function<std::size_t(const TokenIds& state, std::size_t episode_step,
                                         std::mt19937_64& rng)>;

// Plays `episodes` under `policy` and reports raw game points.
inline EvalReport evaluate_policy(const Policy& policy, const GameSpec& spec,
                                  StateBuilder& builder, std::size_t episodes,
                                  std::uint64_t seed, std::size_t step_cap,
                                  const ShapingConfig& shaping = {}) {
  std::mt19937_64 rng(seed);
  EvalReport rep;
  std::size_t repeats = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    auto [handle, master] = reset(spec, rng());
    builder.reset(master);
    RepeatTracker tracker;
    for (std::size_t t = 0; t < step_cap && !handle.terminated(); ++t) {
      auto ids = builder.ids();
      std::size_t a = policy(*ids, t, rng);
      auto r = handle.step(a);
      auto shaped = shape_step(r.reward, a, r.master, tracker, shaping);
      repeats += shaped.repeated_bad ? 1 : 0;
      builder.push(spec.actions[a], SentenceTag::kAction);
      builder.push(r.master, SentenceTag::kMaster);
      ++rep.steps;
    }
    rep.scores.push_back(handle.score());
  }
  for (double s : rep.scores) rep.mean_score += s;
  if (!rep.scores.empty()) rep.mean_score /= double(rep.scores.size());
  rep.repeat_bad_rate = rep.steps ? double(repeats) / double(rep.steps) : 0.0;
  return rep;
}

// Epsilon-greedy play with frozen parameters.
inline EvalReport evaluate(Network& net, const GameSpec& spec, StateBuilder& builder,
                           std::size_t episodes, double epsilon, std::uint64_t seed,
                           std::size_t step_cap, const ShapingConfig& shaping = {}) {
  if (net.num_actions() != spec.action_count()) {
    throw ShapeError("network scores " + std::to_string(net.num_actions()) +
                     " actions but the game has " + std::to_string(spec.action_count()));
  }
  if (net.vocab_size() != builder.vocab().size()) {
    throw ShapeError("network vocabulary has " + std::to_string(net.vocab_size()) +
                     " tokens but the game needs " + std::to_string(builder.vocab().size()));
  }
  const std::size_t na = spec.action_count();
  Policy greedy = [&](const TokenIds& x, std::size_t, std::mt19937_64& rng) {
    return act([&] { return net.q_values(x); }, na, epsilon, rng);
  };
  return evaluate_policy(greedy, spec, builder, episodes, seed, step_cap, shaping);
}

// ---- Checkpoint <-> network ----------------------------------------------

inline Tensor<float> encoder_meta(const EncoderConfig& c) {
  std::vector<float> v{float(c.embedding_dim),
                       float(c.filters),
                       c.pooling == PoolMode::kMax ? 0.f : 1.f,
                       c.position_embeddings ? 1.f : 0.f,
                       c.kind == EncoderKind::kCnn ? 0.f : 1.f,
                       float(c.token_cap),
                       float(c.lstm_hidden),
                       c.relu ? 1.f : 0.f,
                       float(c.kernel_sizes.size())};
  for (auto k : c.kernel_sizes) v.push_back(float(k));
  Shape s{v.size()};
  return Tensor<float>(std::move(s), std::move(v));
}

inline EncoderConfig encoder_from_meta(const Tensor<float>& t) {
  const auto& v = t.data;
  if (v.size() < 9 || v.size() != 9 + std::size_t(v[8])) {
    throw CheckpointError("corrupt checkpoint: malformed encoder metadata");
  }
  EncoderConfig c;
  c.embedding_dim = std::size_t(v[0]);
  c.filters = std::size_t(v[1]);
  c.pooling = v[2] == 0.f ? PoolMode::kMax : PoolMode::kMean;
  c.position_embeddings = v[3] != 0.f;
  c.kind = v[4] == 0.f ? EncoderKind::kCnn : EncoderKind::kLstm;
  c.token_cap = std::size_t(v[5]);
  c.lstm_hidden = std::size_t(v[6]);
  c.relu = v[7] != 0.f;
  c.kernel_sizes.clear();
  for (std::size_t i = 9; i < v.size(); ++i) c.kernel_sizes.push_back(std::size_t(v[i]));
  return c;
}

// Integers up to 2^48 split into two exactly representable floats.
inline Tensor<float> counter_tensor(std::uint64_t n) {
  return Tensor<float>({2}, {float(n & 0xffffff), float(n >> 24)});
}

inline std::uint64_t counter_value(const Tensor<float>& t) {
  if (t.size() != 2) throw CheckpointError("corrupt checkpoint: malformed counter");
  return std::uint64_t(t.data[0]) | (std::uint64_t(t.data[1]) << 24);
}

inline Checkpoint make_checkpoint(Network& net, const AdamState<float>* adam,
                                  std::uint64_t global_step, const std::mt19937_64& rng) {
  Checkpoint ck;
  ck.put("meta.encoder", encoder_meta(net.config()));
  auto params = net.params();
  for (auto* p : params) ck.put(p->name, p->value);
  if (adam && !adam->m.empty()) {
    ck.put("adam.step", counter_tensor(adam->step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.put("adam.m." + params[i]->name, Tensor<float>(params[i]->shape(), adam->m[i]));
      ck.put("adam.v." + params[i]->name, Tensor<float>(params[i]->shape(), adam->v[i]));
    }
  }
  ck.global_step = global_step;
  ck.rng_state = rng_words(rng);
  return ck;
}

// Copies checkpoint tensors into `net`, which must have matching shapes.
inline void load_into(const Checkpoint& ck, Network& net) {
  for (auto* p : net.params()) {
    const auto& t = ck.at(p->name);
    if (t.shape != p->shape()) {
      throw ShapeError("checkpoint tensor '" + p->name + "' has shape " + shape_string(t.shape) +
                       " but the network expects " + shape_string(p->shape()));
    }
    p->value.data = t.data;
  }
  net.mark_updated();
}

inline void load_adam(const Checkpoint& ck, Network& net, AdamState<float>& adam) {
  const auto* step = ck.find("adam.step");
  if (!step) {
    adam = AdamState<float>{};
    return;
  }
  auto params = net.params();
  adam.reset(params);
  adam.step = counter_value(*step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = ck.at("adam.m." + params[i]->name);
    const auto& v = ck.at("adam.v." + params[i]->name);
    if (m.shape != params[i]->shape() || v.shape != params[i]->shape()) {
      throw ShapeError("checkpoint optimizer state for '" + params[i]->name + "' has wrong shape");
    }
    adam.m[i] = m.data;
    adam.v[i] = v.data;
  }
}

// Rebuilds a network from its own metadata and tensors.
inline Network network_from_checkpoint(const Checkpoint& ck) {
  EncoderConfig cfg = encoder_from_meta(ck.at("meta.encoder"));
  const auto& word = ck.at("embed.word");
  const auto& head = ck.at("head.w");
  if (word.rank() != 2 || head.rank() != 2) throw CheckpointError("corrupt checkpoint: ranks");
  Network net(cfg, word.dim(0), head.dim(0), 0);
  load_into(ck, net);
  return net;
}

// ---- Training loop -------------------------------------------------------

struct EvalPoint {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  EvalReport report;
};

struct TrainSummary {
  std::uint64_t steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t repeat_bad_steps = 0;
  std::uint64_t td_steps = 0;
  std::size_t stale_priority_updates = 0;
  std::vector<EvalPoint> evals;
  bool stopped_early = false;

  double repeat_bad_rate() const { return steps ? double(repeat_bad_steps) / double(steps) : 0.0; }
  // Sum of eval mean scores, one term per eval period.
  double eval_area() const {
    double a = 0.0;
    for (const auto& e : evals) a += e.report.mean_score;
    return a;
  }
};

struct TrainHooks {
  // Metrics JSONL sink; null disables metrics.
  std::ostream* metrics = nullptr;
  // Directory for ckpt-<step>.bin; empty disables checkpoints.
  std::string checkpoint_dir;
  // Called after each evaluation; returning false stops training.
  std::function<bool(const EvalPoint&, Network&)> on_eval;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[1]) << 32) | out[0];
}

namespace detail {

inline nlohmann::json metrics_record(std::uint64_t step, std::uint64_t episode, double epsilon,
                                     std::optional<double> loss, const EvalReport* eval,
                                     double repeat_rate) {
  nlohmann::json j;
  j["step"] = step;
  j["episode"] = episode;
  j["epsilon"] = epsilon;
  j["loss"] = loss ? nlohmann::json(*loss) : nlohmann::json(nullptr);
  j["eval_mean_score"] = eval ? nlohmann::json(eval->mean_score) : nlohmann::json(nullptr);
  j["eval_scores"] = eval ? nlohmann::json(eval->scores) : nlohmann::json(nullptr);
  j["repeat_bad_rate"] = repeat_rate;
  return j;
}

}  // namespace detail

inline TrainSummary run_training(const GameSpec& spec, const TrainConfig& cfg,
                                 const EncoderConfig& enc, const ShapingConfig& shaping,
                                 StateBuilder& builder, const TrainHooks& hooks = {}) {
  cfg.validate();
  enc.validate();
  shaping.validate();
  Network net(enc, builder.vocab().size(), spec.action_count(), derive_seed(cfg.seed, 1));
  std::optional<Network> target;
  if (cfg.target_network) target.emplace(net);
  AdamState<float> adam;
  ReplayMemory replay(cfg.replay_capacity, cfg.per);
  std::mt19937_64 rng(cfg.seed);
  StateBuilder eval_builder = builder;
  const std::size_t na = spec.action_count();
  std::vector<std::string> kept;

  TrainSummary sum;
  auto [handle, master] = reset(spec, rng());
  builder.reset(master);
  auto s = builder.ids();
  RepeatTracker tracker;
  std::size_t ep_steps = 0, ep_repeats = 0, ep_updates = 0;
  double ep_loss = 0.0;

  for (std::uint64_t step = 1; step <= cfg.total_steps; ++step) {
    const double eps = epsilon_at(step - 1, cfg);
    const std::size_t a = act([&] { return net.q_values(*s); }, na, eps, rng);
    const StepResult r = handle.step(a);
    const ShapedReward shaped = shape_step(r.reward, a, r.master, tracker, shaping);
    builder.push(spec.actions[a], SentenceTag::kAction);
    builder.push(r.master, SentenceTag::kMaster);
    auto s2 = builder.ids();
    ++ep_steps;
    if (shaped.repeated_bad) {
      ++ep_repeats;
      ++sum.repeat_bad_steps;
    }
    // An episode cut by the step cap is not terminal for bootstrapping.
    replay.push(ReplaySample{s, a, shaped.reward, s2, r.terminal, 0.0});

    if (step > cfg.observation_steps) {
      const std::size_t bs = cfg.batch_size;
      std::vector<SampleRef> refs;
      std::vector<double> scales(bs, 1.0);
      if (cfg.sampler == SamplerKind::kPriority) {
        auto pb = replay.sample_per(bs, rng);
        const double b = cfg.per.b_at(step - cfg.observation_steps,
                                      cfg.epsilon_decay_steps - cfg.observation_steps);
        for (std::size_t i = 0; i < bs; ++i)
          scales[i] = importance_scale(pb.probabilities[i], replay.size(), b);
        refs = std::move(pb.refs);
      } else {
        refs = replay.sample(cfg.sampler, bs, rng);
      }
      std::vector<const ReplaySample*> batch;
      for (const auto& ref : refs) batch.push_back(&replay.at(ref));
      TdResult td = td_step(net, batch, cfg.gamma, scales, adam, cfg.learning_rate,
                            target ? &*target : nullptr);
      if (cfg.sampler == SamplerKind::kPriority) {
        sum.stale_priority_updates += replay.update_priorities(refs, td.deltas);
      }
      ++sum.td_steps;
      ++ep_updates;
      ep_loss += td.loss;
      if (target && sum.td_steps % cfg.target_sync_period == 0) *target = net;
    }
    s = s2;
    sum.steps = step;

    if (r.terminal || ep_steps >= cfg.episode_step_cap) {
      if (hooks.metrics) {
        std::optional<double> loss;
        if (ep_updates) loss = ep_loss / double(ep_updates);
        *hooks.metrics << detail::metrics_record(step, sum.episodes, eps, loss, nullptr,
                                                 double(ep_repeats) / double(ep_steps))
                              .dump()
                       << '\n';
      }
      ++sum.episodes;
      auto next = reset(spec, rng());
      handle = std::move(next.first);
      builder.reset(next.second);
      s = builder.ids();
      tracker.reset();
      ep_steps = ep_repeats = ep_updates = 0;
      ep_loss = 0.0;
    }

    if (step % cfg.eval_period == 0) {
      if (!hooks.checkpoint_dir.empty()) {
        std::string path =
            (std::filesystem::path(hooks.checkpoint_dir) / ("ckpt-" + std::to_string(step) + ".bin"))
                .string();
        try {
          save_checkpoint(path, make_checkpoint(net, &adam, step, rng));
        } catch (const std::exception& e) {
          throw std::runtime_error("checkpoint write failed at step " + std::to_string(step) +
                                   ": " + e.what());
        }
        kept.push_back(path);
        if (cfg.keep_checkpoints && kept.size() > cfg.keep_checkpoints) {
          std::filesystem::remove(kept.front());
          kept.erase(kept.begin());
        }
      }
      EvalPoint point;
      point.step = step;
      point.episode = sum.episodes;
      point.report = evaluate(net, spec, eval_builder, cfg.eval_episodes, cfg.eval_epsilon,
                              derive_seed(cfg.seed, 1000 + step), cfg.episode_step_cap, shaping);
      if (hooks.metrics) {
        *hooks.metrics << detail::metrics_record(step, sum.episodes, eps, std::nullopt,
                                                 &point.report, point.report.repeat_bad_rate)
                              .dump()
                       << '\n';
      }
      sum.evals.push_back(point);
      if (hooks.on_eval && !hooks.on_eval(point, net)) {
        sum.stopped_early = true;
        break;
      }
    }
  }
  if (hooks.metrics) hooks.metrics->flush();
  return sum;
}

}  // namespace trajq
