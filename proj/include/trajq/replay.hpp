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

// Bounded replay memory with uniform, fixed-weight and priority sampling.
//
//   fixed-weight:  w_i = exp(r_i),            P(i) = w_i / sum_j w_j
//   priority:      w_i = |delta_i| + e,       P(i) = w_i^a / sum_j w_j^a
//   importance:    scale_i = (1 / (N * P(i)))^b
//
// Both weighted strategies keep their own sum-tree so any strategy can be
// drawn from the same memory. Draws are i.i.d. with replacement.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajq/sum_tree.hpp"
#include "trajq/trajectory.hpp"

namespace trajq {

enum class SamplerKind { kUniform, kFixedWeight, kPriority };

inline SamplerKind parse_sampler(const std::string& name) {
  if (name == "uniform") return SamplerKind::kUniform;
  if (name == "fixed_weight" || name == "weighted") return SamplerKind::kFixedWeight;
  if (name == "per" || name == "priority") return SamplerKind::kPriority;
  throw std::invalid_argument("unknown sampler '" + name + "'");
}

inline const char* sampler_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::kUniform: return "uniform";
    case SamplerKind::kFixedWeight: return "fixed_weight";
    case SamplerKind::kPriority: return "per";
  }
  return "?";
}

struct PerConfig {
  double a = 0.6;
  double e = 0.01;
  // Importance exponent, annealed linearly from b_start to b_end.
  double b_start = 0.0;
  double b_end = 1.0;

  void validate() const {
    if (!(a >= 0)) throw std::invalid_argument("per: a must be >= 0");
    if (!(e > 0)) throw std::invalid_argument("per: e must be > 0");
    if (!(b_start >= 0 && b_start <= 1 && b_end >= 0 && b_end <= 1)) {
      throw std::invalid_argument("per: b must lie in [0, 1]");
    }
  }

  double b_at(std::uint64_t step, std::uint64_t horizon) const {
    if (horizon == 0 || step >= horizon) return b_end;
    double frac = double(step) / double(horizon);
    return b_start + (b_end - b_start) * frac;
  }
};

struct ReplaySample {
  std::shared_ptr<const TokenIds> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::shared_ptr<const TokenIds> next_state;
  bool terminal = false;
  double priority = 0.0;
};

// Slot plus the insertion serial, so updates to evicted samples are detected.
struct SampleRef {
  std::size_t slot = 0;
  std::uint64_t serial = 0;
};

struct PerBatch {
  std::vector<SampleRef> refs;
  std::vector<double> probabilities;
};

class EmptyReplayError : public std::logic_error {
 public:
  EmptyReplayError() : std::logic_error("cannot sample from an empty replay memory") {}
};

inline double importance_scale(double probability, std::size_t n, double b) {
  if (!(probability > 0.0)) throw std::invalid_argument("importance_scale: zero probability");
  if (n == 0) throw std::invalid_argument("importance_scale: empty memory");
  return std::pow(1.0 / (double(n) * probability), b);
}

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity, PerConfig per = {})
      : capacity_(capacity),
        per_(per),
        slots_(capacity),
        serials_(capacity, 0),
        reward_tree_(capacity),
        priority_tree_(capacity) {
    per_.validate();
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint64_t pushed() const { return next_serial_; }
  const PerConfig& per_config() const { return per_; }
  double max_priority() const { return max_priority_; }

  const ReplaySample& at(std::size_t slot) const { return slots_.at(slot); }
  const ReplaySample& at(const SampleRef& ref) const { return slots_.at(ref.slot); }
  bool is_live(const SampleRef& ref) const {
    return ref.slot < size_ && serials_[ref.slot] == ref.serial;
  }

  // Overwrites the oldest sample at capacity. New samples enter with the
  // largest priority seen so far.
  void push(ReplaySample sample) {
    if (!(sample.reward >= -1.0 && sample.reward <= 1.0)) {
      throw std::invalid_argument("replay: reward " + std::to_string(sample.reward) +
                                  " outside [-1, 1]");
    }
    std::size_t slot = next_serial_ % capacity_;
    sample.priority = max_priority_;
    reward_tree_.set(slot, std::exp(sample.reward));
    priority_tree_.set(slot, std::pow(sample.priority, per_.a));
    slots_[slot] = std::move(sample);
    serials_[slot] = next_serial_++;
    if (size_ < capacity_) ++size_;
  }

  template <class Rng>
  std::vector<SampleRef> sample_uniform(std::size_t n, Rng& rng) const {
    if (n == 0) return {};
    if (empty()) throw EmptyReplayError();
    std::uniform_int_distribution<std::size_t> dist(0, size_ - 1);
    std::vector<SampleRef> out(n);
    for (auto& r : out) r = ref(dist(rng));
    return out;
  }

  template <class Rng>
  std::vector<SampleRef> sample_fixed_weight(std::size_t n, Rng& rng) const {
    if (n == 0) return {};
    if (empty()) throw EmptyReplayError();
    return draw(reward_tree_, n, rng);
  }

  template <class Rng>
  PerBatch sample_per(std::size_t n, Rng& rng) const {
    PerBatch out;
    if (n == 0) return out;
    if (empty()) throw EmptyReplayError();
    out.refs = draw(priority_tree_, n, rng);
    for (const auto& r : out.refs) out.probabilities.push_back(probability_per(r.slot));
    return out;
  }

  template <class Rng>
  std::vector<SampleRef> sample(SamplerKind kind, std::size_t n, Rng& rng) const {
    switch (kind) {
      case SamplerKind::kUniform: return sample_uniform(n, rng);
      case SamplerKind::kFixedWeight: return sample_fixed_weight(n, rng);
      case SamplerKind::kPriority: return sample_per(n, rng).refs;
    }
    return {};
  }

  double probability_uniform() const { return empty() ? 0.0 : 1.0 / double(size_); }
  double probability_fixed_weight(std::size_t slot) const {
    return reward_tree_.get(slot) / reward_tree_.total();
  }
  double probability_per(std::size_t slot) const {
    return priority_tree_.get(slot) / priority_tree_.total();
  }

  // Sets w = |delta| + e for each live ref; returns how many were stale.
  std::size_t update_priorities(std::span<const SampleRef> refs, std::span<const double> deltas) {
    if (refs.size() != deltas.size()) {
      throw std::invalid_argument("update_priorities: refs and deltas differ in length");
    }
    std::size_t stale = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (!is_live(refs[i])) {
        ++stale;
        continue;
      }
      double w = std::abs(deltas[i]) + per_.e;
      slots_[refs[i].slot].priority = w;
      priority_tree_.set(refs[i].slot, std::pow(w, per_.a));
      if (w > max_priority_) max_priority_ = w;
    }
    stale_updates_ += stale;
    return stale;
  }

  std::size_t stale_updates() const { return stale_updates_; }

  const SumTree<double>& reward_tree() const { return reward_tree_; }
  const SumTree<double>& priority_tree() const { return priority_tree_; }
  std::uint64_t node_visits() const { return reward_tree_.visits() + priority_tree_.visits(); }

  // Oldest first: {index, action, reward, priority, terminal} per line.
  void dump_jsonl(std::ostream& out) const {
    for (std::size_t k = 0; k < size_; ++k) {
      std::uint64_t serial = next_serial_ - size_ + k;
      std::size_t slot = serial % capacity_;
      const auto& s = slots_[slot];
      nlohmann::json rec = {{"index", slot},
                            {"action", s.action},
                            {"reward", s.reward},
                            {"priority", s.priority},
                            {"terminal", s.terminal}};
      out << rec.dump() << '\n';
    }
  }

 private:
  SampleRef ref(std::size_t slot) const { return SampleRef{slot, serials_[slot]}; }

  template <class Rng>
  std::vector<SampleRef> draw(const SumTree<double>& tree, std::size_t n, Rng& rng) const {
    std::uniform_real_distribution<double> dist(0.0, tree.total());
    std::vector<SampleRef> out(n);
    for (auto& r : out) {
      std::size_t leaf = tree.find(dist(rng));
      if (leaf >= size_) leaf = size_ - 1;
      r = ref(leaf);
    }
    return out;
  }

  std::size_t capacity_;
  PerConfig per_;
  std::vector<ReplaySample> slots_;
  std::vector<std::uint64_t> serials_;
  SumTree<double> reward_tree_;
  SumTree<double> priority_tree_;
  std::size_t size_ = 0;
  std::uint64_t next_serial_ = 0;
  double max_priority_ = 1.0;
  std::size_t stale_updates_ = 0;
};

}  // namespace trajq
