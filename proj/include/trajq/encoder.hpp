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

// Trajectory encoders and the Q head.
//
// The CNN encoder embeds tokens (word + optional learned position), runs one
// bank of filters per kernel size with k-1 start-token pads on the left,
// pools each feature row over time and concatenates the pooled vectors in
// ascending kernel size. A single affine head maps the state to one score per
// catalog action.
//
// There are two routes to the same function. The reference route composes
// gather/add/conv1d/pool primitives on the tape. The fused route used for
// training rests on linearity: a window response is
//
//   b_f + sum_j W[f][j] . (word[id(t-k+1+j)] + pos[t-k+1+j])
//
// so projecting the whole word table and position table through the filters
// once per parameter update reduces each window to k row additions. The
// projections live in a cache keyed by a parameter version; call
// mark_updated() after writing parameters.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajq/linalg.hpp"
#include "trajq/ops.hpp"
#include "trajq/tape.hpp"
#include "trajq/tensor.hpp"
#include "trajq/trajectory.hpp"

namespace trajq {

enum class EncoderKind { kCnn, kLstm };

struct EncoderConfig {
  std::size_t embedding_dim = 64;
  std::vector<std::size_t> kernel_sizes{3, 4, 5};
  std::size_t filters = 32;
  PoolMode pooling = PoolMode::kMax;
  bool position_embeddings = true;
  EncoderKind kind = EncoderKind::kCnn;
  std::size_t token_cap = 1024;
  std::size_t lstm_hidden = 96;
  // Nonlinearity between pooling and head; off keeps contributions linear.
  bool relu = false;
  double init_limit = 0.05;

  void validate() const {
    if (embedding_dim == 0) throw std::invalid_argument("encoder: embedding_dim must be > 0");
    if (token_cap == 0) throw std::invalid_argument("encoder: token_cap must be > 0");
    if (kind == EncoderKind::kCnn) {
      if (kernel_sizes.empty()) throw std::invalid_argument("encoder: no kernel sizes");
      for (auto k : kernel_sizes)
        if (k == 0) throw std::invalid_argument("encoder: kernel sizes must be >= 1");
      if (filters == 0) throw std::invalid_argument("encoder: filters must be >= 1");
    } else if (lstm_hidden == 0) {
      throw std::invalid_argument("encoder: lstm_hidden must be > 0");
    }
  }

  std::size_t state_width() const {
    return kind == EncoderKind::kCnn ? kernel_sizes.size() * filters : lstm_hidden;
  }

  std::size_t max_kernel() const {
    return kernel_sizes.empty() ? 1
                                : *std::max_element(kernel_sizes.begin(), kernel_sizes.end());
  }
};

inline const char* pool_name(PoolMode m) { return m == PoolMode::kMax ? "max" : "mean"; }
inline PoolMode parse_pool(const std::string& s) {
  if (s == "max") return PoolMode::kMax;
  if (s == "mean") return PoolMode::kMean;
  throw std::invalid_argument("unknown pooling mode '" + s + "'");
}
inline const char* encoder_kind_name(EncoderKind k) {
  return k == EncoderKind::kCnn ? "cnn" : "lstm";
}
inline EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "cnn") return EncoderKind::kCnn;
  if (s == "lstm") return EncoderKind::kLstm;
  throw std::invalid_argument("unknown encoder kind '" + s + "'");
}

// Lowest index among the maxima.
template <class Real>
std::size_t argmax_lowest(std::span<const Real> v) {
  if (v.empty()) throw std::invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct FilterTrace {
  std::size_t kernel = 0;
  std::size_t argmax = 0;
  double pooled = 0.0;
  // Value the head sees (after the optional ReLU).
  double input = 0.0;
};

struct AttentionTrace {
  std::size_t length = 0;
  std::vector<FilterTrace> filters;
};

struct AttentionSpan {
  // Inclusive token range of the window; start-token pads are clipped off.
  std::size_t start = 0;
  std::size_t end = 0;
  double weight = 0.0;
  std::size_t filter = 0;
};

// Ranks filters by contribution = head input x head weight of the chosen
// action and returns up to k distinct spans, strongest first. Weights are
// the contributions normalized by the sum of their magnitudes.
template <class Real>
std::vector<AttentionSpan> attention_topk(const std::optional<AttentionTrace>& trace,
                                          std::span<const Real> head_row, std::size_t k = 3) {
  if (!trace) throw std::invalid_argument("attention trace unavailable: mean pooling");
  const auto& fs = trace->filters;
  if (head_row.size() != fs.size()) {
    throw ShapeError("attention_topk: head row has " + std::to_string(head_row.size()) +
                     " weights for " + std::to_string(fs.size()) + " filters");
  }
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t f = 0; f < fs.size(); ++f)
    ranked.emplace_back(fs[f].input * double(head_row[f]), f);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<AttentionSpan> out;
  std::vector<double> contrib;
  for (const auto& [c, f] : ranked) {
    if (out.size() == k) break;
    const auto& ft = fs[f];
    std::size_t start = ft.argmax + 1 >= ft.kernel ? ft.argmax + 1 - ft.kernel : 0;
    bool seen = false;
    for (const auto& s : out) seen = seen || (s.start == start && s.end == ft.argmax);
    if (seen) continue;
    out.push_back(AttentionSpan{start, ft.argmax, 0.0, f});
    contrib.push_back(c);
  }
  double norm = 0.0;
  for (double c : contrib) norm += std::abs(c);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = norm > 0 ? contrib[i] / norm : 0.0;
  return out;
}

template <class Real>
struct Encoding {
  std::vector<Real> state;
  std::optional<AttentionTrace> trace;
};

enum class Route { kFused, kReference };

template <class Real>
class QNetwork {
 public:
  QNetwork(EncoderConfig cfg, std::size_t vocab_size, std::size_t num_actions,
           std::uint64_t seed)
      : cfg_(std::move(cfg)), vocab_size_(vocab_size), num_actions_(num_actions) {
    cfg_.validate();
    std::sort(cfg_.kernel_sizes.begin(), cfg_.kernel_sizes.end());
    if (vocab_size_ <= 2) throw std::invalid_argument("QNetwork: vocabulary too small");
    if (num_actions_ == 0) throw std::invalid_argument("QNetwork: no actions");
    const std::size_t d = cfg_.embedding_dim;
    word_ = Param<Real>("embed.word", {vocab_size_, d});
    if (cfg_.position_embeddings) pos_ = Param<Real>("embed.pos", {cfg_.token_cap, d});
    if (cfg_.kind == EncoderKind::kCnn) {
      for (auto k : cfg_.kernel_sizes) {
        conv_w_.emplace_back("conv.k" + std::to_string(k) + ".w", Shape{cfg_.filters, k, d});
        conv_b_.emplace_back("conv.k" + std::to_string(k) + ".b", Shape{cfg_.filters});
      }
    } else {
      const std::size_t h = cfg_.lstm_hidden;
      lstm_wx_ = Param<Real>("lstm.wx", {4 * h, d});
      lstm_wh_ = Param<Real>("lstm.wh", {4 * h, h});
      lstm_b_ = Param<Real>("lstm.b", {4 * h});
    }
    head_w_ = Param<Real>("head.w", {num_actions_, cfg_.state_width()});
    head_b_ = Param<Real>("head.b", {num_actions_});

    std::mt19937_64 rng(seed);
    for (auto* p : params()) p->init_uniform(rng, Real(cfg_.init_limit));
  }

  // Copies share nothing; the projection cache is rebuilt lazily.
  QNetwork(const QNetwork& o)
      : cfg_(o.cfg_), vocab_size_(o.vocab_size_), num_actions_(o.num_actions_),
        word_(o.word_), pos_(o.pos_), conv_w_(o.conv_w_), conv_b_(o.conv_b_),
        lstm_wx_(o.lstm_wx_), lstm_wh_(o.lstm_wh_), lstm_b_(o.lstm_b_),
        head_w_(o.head_w_), head_b_(o.head_b_) {}
  QNetwork& operator=(const QNetwork& o) {
    if (this != &o) {
      QNetwork tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  QNetwork(QNetwork&&) noexcept = default;
  QNetwork& operator=(QNetwork&&) noexcept = default;

  const EncoderConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t state_width() const { return cfg_.state_width(); }

  // Fixed order; checkpoints and the optimizer rely on it.
  std::vector<Param<Real>*> params() {
    std::vector<Param<Real>*> out{&word_};
    if (cfg_.position_embeddings) out.push_back(&pos_);
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      out.push_back(&conv_w_[i]);
      out.push_back(&conv_b_[i]);
    }
    if (cfg_.kind == EncoderKind::kLstm) {
      out.push_back(&lstm_wx_);
      out.push_back(&lstm_wh_);
      out.push_back(&lstm_b_);
    }
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
  }

  std::vector<const Param<Real>*> params() const {
    auto ps = const_cast<QNetwork*>(this)->params();
    return {ps.begin(), ps.end()};
  }

  Param<Real>* find(const std::string& name) {
    for (auto* p : params())
      if (p->name == name) return p;
    return nullptr;
  }

  Param<Real>& head_weights() { return head_w_; }
  Param<Real>& head_bias() { return head_b_; }

  // Invalidates cached projections after any direct parameter write.
  void mark_updated() { ++version_; }

  // ---- Inference without a tape ------------------------------------------

  Encoding<Real> encode(const TokenIds& x) {
    check_input(x);
    Encoding<Real> enc;
    enc.state.resize(state_width());
    if (cfg_.kind == EncoderKind::kLstm) {
      Tape<Real> tape;
      const TokenIds* one[] = {&x};
      Var s = encode_batch(tape, one);
      auto v = tape.value(s);
      enc.state.assign(v.begin(), v.end());
      return enc;
    }
    std::vector<std::uint32_t> arg(state_width());
    auto cache = projections(x.size());
    fused_pool(*cache, x, enc.state.data(), arg.data());
    if (cfg_.pooling == PoolMode::kMax) {
      AttentionTrace tr;
      tr.length = x.size();
      for (std::size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki)
        for (std::size_t f = 0; f < cfg_.filters; ++f) {
          std::size_t i = ki * cfg_.filters + f;
          tr.filters.push_back(FilterTrace{cfg_.kernel_sizes[ki], arg[i], double(enc.state[i]),
                                           double(head_input(enc.state[i]))});
        }
      enc.trace = std::move(tr);
    }
    if (cfg_.relu)
      for (auto& v : enc.state) v = head_input(v);
    return enc;
  }

  // Affine head over an encoded state.
  std::vector<Real> q_values(std::span<const Real> state) const {
    if (state.size() != state_width()) {
      throw ShapeError("q_values: state width " + std::to_string(state.size()) +
                       " does not match head width " + std::to_string(state_width()));
    }
    std::vector<Real> q(head_b_.value.data);
    linalg::gemm_nt(state.data(), head_w_.value.data.data(), q.data(), 1, state.size(),
                    num_actions_, true);
    return q;
  }

  std::vector<Real> q_values(const TokenIds& x) { return q_values(encode(x).state); }

  // Q values for many states into a [B x A] buffer.
  std::vector<Real> q_values_batch(std::span<const TokenIds* const> xs) {
    if (cfg_.kind == EncoderKind::kLstm) {
      Tape<Real> tape;
      Var q = forward(tape, xs);
      auto v = tape.value(q);
      return {v.begin(), v.end()};
    }
    const std::size_t w = state_width();
    std::size_t longest = 0;
    for (auto* x : xs) {
      check_input(*x);
      longest = std::max(longest, x->size());
    }
    auto cache = projections(longest);
    std::vector<Real> states(xs.size() * w);
    std::vector<std::uint32_t> arg(w);
    for (std::size_t b = 0; b < xs.size(); ++b)
      fused_pool(*cache, *xs[b], states.data() + b * w, arg.data());
    if (cfg_.relu)
      for (auto& v : states) v = head_input(v);
    std::vector<Real> q(xs.size() * num_actions_);
    for (std::size_t b = 0; b < xs.size(); ++b)
      std::copy(head_b_.value.data.begin(), head_b_.value.data.end(),
                q.begin() + b * num_actions_);
    linalg::gemm_nt(states.data(), head_w_.value.data.data(), q.data(), xs.size(), w,
                    num_actions_, true);
    return q;
  }

  std::size_t greedy_action(const TokenIds& x) {
    auto q = q_values(x);
    return argmax_lowest<Real>(q);
  }

  // Per kernel size, the [K x L] feature matrix from the reference route.
  std::vector<std::vector<Real>> feature_maps(const TokenIds& x) {
    if (cfg_.kind != EncoderKind::kCnn) throw std::logic_error("feature_maps: CNN only");
    check_input(x);
    Tape<Real> tape;
    Var emb = embed(tape, x);
    Var pad = ops::gather_rows(tape, tape.param(word_), start_row());
    std::vector<std::vector<Real>> out;
    for (std::size_t ki = 0; ki < conv_w_.size(); ++ki) {
      Var f = ops::conv1d(tape, emb, tape.param(conv_w_[ki]), tape.param(conv_b_[ki]), pad);
      auto v = tape.value(f);
      out.emplace_back(v.begin(), v.end());
    }
    return out;
  }

  // ---- Tape routes -------------------------------------------------------

  // [B x state_width] states, before the optional ReLU.
  Var encode_batch(Tape<Real>& tape, std::span<const TokenIds* const> xs,
                   Route route = Route::kFused) {
    if (xs.empty()) throw std::invalid_argument("encode_batch: empty batch");
    for (auto* x : xs) check_input(*x);
    if (cfg_.kind == EncoderKind::kLstm) return lstm_batch(tape, xs);
    if (route == Route::kFused) return fused_batch(tape, xs);
    std::vector<Var> rows;
    for (auto* x : xs) rows.push_back(reference_state(tape, *x));
    return ops::stack_rows<Real>(tape, rows);
  }

  // [B x A] Q values.
  Var forward(Tape<Real>& tape, std::span<const TokenIds* const> xs,
              Route route = Route::kFused) {
    Var s = encode_batch(tape, xs, route);
    if (cfg_.relu) s = ops::relu(tape, s);
    return ops::affine(tape, s, tape.param(head_w_), tape.param(head_b_));
  }

 private:
  struct Projection {
    std::uint64_t version = 0;
    std::size_t r = 0;              // sum over kernels of k * K
    std::vector<std::size_t> offset;  // column offset of each kernel bank
    std::vector<Real> wr;           // [r x D], row off + j*K + f = W[f][j]
    std::vector<Real> wp;           // [V x r] word table through the filters
    std::size_t pos_rows = 0;
    std::vector<Real> pp;           // [pos_rows x r]
    // Per kernel, bias plus position responses: [pos_rows x K], or [1 x K]
    // when position embeddings are off.
    std::vector<std::vector<Real>> pc;
  };

  Real head_input(Real v) const { return cfg_.relu && v < Real{0} ? Real{0} : v; }

  std::vector<std::size_t> start_row() const { return {std::size_t{0}}; }

  void check_input(const TokenIds& x) const {
    if (x.ids.empty()) throw std::invalid_argument("encode: empty input");
    if (x.size() > cfg_.token_cap) {
      throw std::invalid_argument("encode: " + std::to_string(x.size()) +
                                  " tokens exceed the cap of " +
                                  std::to_string(cfg_.token_cap));
    }
    if (x.positions.size() != x.ids.size()) {
      throw ShapeError("encode: ids and positions differ in length");
    }
    for (std::size_t i = 0; i < x.ids.size(); ++i) {
      if (x.ids[i] >= vocab_size_) {
        throw std::invalid_argument("encode: token id " + std::to_string(x.ids[i]) +
                                    " outside vocabulary of " + std::to_string(vocab_size_));
      }
      if (x.positions[i] != i) {
        throw std::invalid_argument("encode: positions must run 0..L-1");
      }
    }
  }

  std::shared_ptr<const Projection> projections(std::size_t rows) {
    rows = std::min(std::max(rows, pos_hint_), cfg_.token_cap);
    pos_hint_ = rows;
    if (cache_ && cache_->version == version_ &&
        (!cfg_.position_embeddings || cache_->pos_rows >= rows)) {
      return cache_;
    }
    auto p = std::make_shared<Projection>();
    const std::size_t d = cfg_.embedding_dim, nf = cfg_.filters;
    p->version = version_;
    for (auto k : cfg_.kernel_sizes) {
      p->offset.push_back(p->r);
      p->r += k * nf;
    }
    p->wr.assign(p->r * d, Real{0});
    for (std::size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki) {
      const std::size_t k = cfg_.kernel_sizes[ki];
      const Real* w = conv_w_[ki].value.data.data();
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t j = 0; j < k; ++j)
          std::copy_n(w + (f * k + j) * d, d, p->wr.data() + (p->offset[ki] + j * nf + f) * d);
    }
    p->wp.resize(vocab_size_ * p->r);
    linalg::gemm_nt(word_.value.data.data(), p->wr.data(), p->wp.data(), vocab_size_, d, p->r,
                    false);
    p->pc.resize(cfg_.kernel_sizes.size());
    if (cfg_.position_embeddings) {
      p->pos_rows = rows;
      p->pp.resize(rows * p->r);
      linalg::gemm_nt(pos_.value.data.data(), p->wr.data(), p->pp.data(), rows, d, p->r,
                      false);
      for (std::size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki) {
        const std::size_t k = cfg_.kernel_sizes[ki];
        auto& pc = p->pc[ki];
        pc.resize(rows * nf);
        const Real* b = conv_b_[ki].value.data.data();
        for (std::size_t t = 0; t < rows; ++t) {
          Real* out = pc.data() + t * nf;
          std::copy_n(b, nf, out);
          for (std::size_t j = 0; j < k; ++j) {
            if (t + j + 1 < k) continue;
            const Real* src = p->pp.data() + (t + j + 1 - k) * p->r + p->offset[ki] + j * nf;
            for (std::size_t f = 0; f < nf; ++f) out[f] += src[f];
          }
        }
      }
    } else {
      for (std::size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki)
        p->pc[ki].assign(conv_b_[ki].value.data.begin(), conv_b_[ki].value.data.end());
    }
    cache_ = p;
    return cache_;
  }

  // Pooled features of one input into `pooled`, argmax per filter into `arg`.
  void fused_pool(const Projection& p, const TokenIds& x, Real* pooled,
                  std::uint32_t* arg) const {
    const std::size_t len = x.size(), nf = cfg_.filters;
    const std::size_t pc_stride = cfg_.position_embeddings ? nf : 0;
    std::vector<Real> feat_buf(nf);
    Real* __restrict feat = feat_buf.data();
    for (std::size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki) {
      const std::size_t k = cfg_.kernel_sizes[ki], off = p.offset[ki];
      Real* __restrict out = pooled + ki * nf;
      std::uint32_t* __restrict am = arg + ki * nf;
      for (std::size_t t = 0; t < len; ++t) {
        const Real* __restrict pc = p.pc[ki].data() + t * pc_stride;
        for (std::size_t f = 0; f < nf; ++f) feat[f] = pc[f];
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t id = t + j + 1 < k ? 0 : x.ids[t + j + 1 - k];
          const Real* __restrict src = p.wp.data() + id * p.r + off + j * nf;
          for (std::size_t f = 0; f < nf; ++f) feat[f] += src[f];
        }
        if (cfg_.pooling == PoolMode::kMax) {
          for (std::size_t f = 0; f < nf; ++f) {
            if (t == 0 || feat[f] > out[f]) {
              out[f] = feat[f];
              am[f] = std::uint32_t(t);
            }
          }
        } else {
          for (std::size_t f = 0; f < nf; ++f) out[f] = t == 0 ? feat[f] : out[f] + feat[f];
        }
      }
      if (cfg_.pooling == PoolMode::kMean)
        for (std::size_t f = 0; f < nf; ++f) out[f] /= Real(len);
    }
  }

  Var fused_batch(Tape<Real>& tape, std::span<const TokenIds* const> xs) {
    const std::size_t w = state_width();
    std::size_t longest = 0;
    for (auto* x : xs) longest = std::max(longest, x->size());
    auto cache = projections(longest);
    std::vector<Real> out(xs.size() * w);
    std::vector<std::uint32_t> arg(xs.size() * w);
    for (std::size_t b = 0; b < xs.size(); ++b)
      fused_pool(*cache, *xs[b], out.data() + b * w, arg.data() + b * w);

    std::vector<Var> inputs{tape.param(word_)};
    Var word = inputs[0];
    std::optional<Var> pos;
    if (cfg_.position_embeddings) {
      pos = tape.param(pos_);
      inputs.push_back(*pos);
    }
    std::vector<Var> ws, bs;
    for (std::size_t ki = 0; ki < conv_w_.size(); ++ki) {
      ws.push_back(tape.param(conv_w_[ki]));
      bs.push_back(tape.param(conv_b_[ki]));
      inputs.push_back(ws.back());
      inputs.push_back(bs.back());
    }
    std::vector<std::vector<TokenId>> ids;
    for (auto* x : xs) ids.push_back(x->ids);
    return tape.record(
        {xs.size(), w}, std::move(out), std::span<const Var>(inputs),
        [this, cache, word, pos, ws, bs, ids = std::move(ids), arg = std::move(arg),
         longest](Tape<Real>& tp, Var o) {
          fused_backward(tp, o, *cache, word, pos, ws, bs, ids, arg, longest);
        });
  }

  void fused_backward(Tape<Real>& tp, Var o, const Projection& p, Var word,
                      std::optional<Var> pos, const std::vector<Var>& ws,
                      const std::vector<Var>& bs, const std::vector<std::vector<TokenId>>& ids,
                      const std::vector<std::uint32_t>& arg, std::size_t longest) const {
    const std::size_t d = cfg_.embedding_dim, nf = cfg_.filters, w = state_width();
    const std::size_t r = p.r;
    auto g = tp.grad(o);

    // Compact the vocabulary rows this batch touches.
    std::vector<std::int32_t> slot(vocab_size_, -1);
    std::vector<std::size_t> rows;
    auto slot_of = [&](std::size_t id) {
      if (slot[id] < 0) {
        slot[id] = std::int32_t(rows.size());
        rows.push_back(id);
      }
      return std::size_t(slot[id]);
    };
    slot_of(0);
    for (const auto& v : ids)
      for (auto id : v) slot_of(id);
    std::vector<Real> dwp(rows.size() * r, Real{0});
    std::vector<Real> dpp(pos ? longest * r : 0, Real{0});
    std::vector<std::vector<Real>> db(ws.size(), std::vector<Real>(nf, Real{0}));

    for (std::size_t b = 0; b < ids.size(); ++b) {
      const auto& x = ids[b];
      const std::size_t len = x.size();
      for (std::size_t ki = 0; ki < ws.size(); ++ki) {
        const std::size_t k = cfg_.kernel_sizes[ki], off = p.offset[ki];
        const Real* gk = g.data() + b * w + ki * nf;
        if (cfg_.pooling == PoolMode::kMax) {
          for (std::size_t f = 0; f < nf; ++f) {
            const Real gv = gk[f];
            if (gv == Real{0}) continue;
            const std::size_t t = arg[b * w + ki * nf + f];
            db[ki][f] += gv;
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t col = off + j * nf + f;
              if (t + j + 1 < k) {
                dwp[slot[0] * r + col] += gv;
              } else {
                const std::size_t i = t + j + 1 - k;
                dwp[std::size_t(slot[x[i]]) * r + col] += gv;
                if (pos) dpp[i * r + col] += gv;
              }
            }
          }
        } else {
          std::vector<Real> gs(nf);
          for (std::size_t f = 0; f < nf; ++f) {
            gs[f] = gk[f] / Real(len);
            db[ki][f] += gk[f];
          }
          for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t j = 0; j < k; ++j) {
              Real* dst;
              Real* dst_pos = nullptr;
              if (t + j + 1 < k) {
                dst = dwp.data() + slot[0] * r + off + j * nf;
              } else {
                const std::size_t i = t + j + 1 - k;
                dst = dwp.data() + std::size_t(slot[x[i]]) * r + off + j * nf;
                if (pos) dst_pos = dpp.data() + i * r + off + j * nf;
              }
              for (std::size_t f = 0; f < nf; ++f) dst[f] += gs[f];
              if (dst_pos)
                for (std::size_t f = 0; f < nf; ++f) dst_pos[f] += gs[f];
            }
          }
        }
      }
    }

    // Back through the projections: wp = word * wr^T, pp = pos * wr^T.
    const std::size_t nrows = rows.size();
    auto wordv = tp.value(word);
    std::vector<Real> word_c(nrows * d);
    for (std::size_t i = 0; i < nrows; ++i)
      std::copy_n(wordv.data() + rows[i] * d, d, word_c.data() + i * d);
    std::vector<Real> dwr(r * d, Real{0});
    linalg::gemm_tn(dwp.data(), word_c.data(), dwr.data(), r, nrows, d, false);
    std::vector<Real> dword_c(nrows * d);
    linalg::gemm_nn(dwp.data(), p.wr.data(), dword_c.data(), nrows, r, d, false);
    auto gword = tp.grad(word);
    for (std::size_t i = 0; i < nrows; ++i) {
      Real* dst = gword.data() + rows[i] * d;
      const Real* src = dword_c.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    if (pos) {
      auto posv = tp.value(*pos);
      linalg::gemm_tn(dpp.data(), posv.data(), dwr.data(), r, longest, d, true);
      auto gpos = tp.grad(*pos);
      linalg::gemm_nn(dpp.data(), p.wr.data(), gpos.data(), longest, r, d, true);
    }
    for (std::size_t ki = 0; ki < ws.size(); ++ki) {
      const std::size_t k = cfg_.kernel_sizes[ki];
      auto gw = tp.grad(ws[ki]);
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t j = 0; j < k; ++j) {
          const Real* src = dwr.data() + (p.offset[ki] + j * nf + f) * d;
          Real* dst = gw.data() + (f * k + j) * d;
          for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
      auto gb = tp.grad(bs[ki]);
      for (std::size_t f = 0; f < nf; ++f) gb[f] += db[ki][f];
    }
  }

  Var embed(Tape<Real>& tape, const TokenIds& x) {
    std::vector<std::size_t> ids(x.ids.begin(), x.ids.end());
    Var emb = ops::gather_rows(tape, tape.param(word_), ids);
    if (cfg_.position_embeddings) {
      std::vector<std::size_t> ps(x.positions.begin(), x.positions.end());
      emb = ops::add(tape, emb, ops::gather_rows(tape, tape.param(pos_), ps));
    }
    return emb;
  }

  // [1 x state_width] via gather, conv1d and pooling primitives.
  Var reference_state(Tape<Real>& tape, const TokenIds& x) {
    Var emb = embed(tape, x);
    Var pad = ops::gather_rows(tape, tape.param(word_), start_row());
    std::vector<Var> parts;
    for (std::size_t ki = 0; ki < conv_w_.size(); ++ki) {
      Var f = ops::conv1d(tape, emb, tape.param(conv_w_[ki]), tape.param(conv_b_[ki]), pad);
      auto pooled = ops::pool_over_time(tape, f, cfg_.pooling);
      parts.push_back(ops::reshape(tape, pooled.out, {1, cfg_.filters}));
    }
    return ops::concat_cols<Real>(tape, parts);
  }

  // Gate order i, f, g, o; the final hidden state is the encoding.
  Var lstm_state(Tape<Real>& tape, const TokenIds& x) {
    const std::size_t h = cfg_.lstm_hidden;
    Var xw = ops::affine(tape, embed(tape, x), tape.param(lstm_wx_), tape.param(lstm_b_));
    Var wh = tape.param(lstm_wh_);
    Var hs = tape.constant({1, h}, std::vector<Real>(h, Real{0}));
    Var cs = tape.constant({1, h}, std::vector<Real>(h, Real{0}));
    for (std::size_t t = 0; t < x.size(); ++t) {
      Var gates = ops::add(tape, ops::slice_rows(tape, xw, t, 1), ops::affine(tape, hs, wh));
      Var i = ops::sigmoid(tape, ops::slice_cols(tape, gates, 0, h));
      Var f = ops::sigmoid(tape, ops::slice_cols(tape, gates, h, h));
      Var gg = ops::tanh(tape, ops::slice_cols(tape, gates, 2 * h, h));
      Var o = ops::sigmoid(tape, ops::slice_cols(tape, gates, 3 * h, h));
      cs = ops::add(tape, ops::hadamard(tape, f, cs), ops::hadamard(tape, i, gg));
      hs = ops::hadamard(tape, o, ops::tanh(tape, cs));
    }
    return hs;
  }

  Var lstm_batch(Tape<Real>& tape, std::span<const TokenIds* const> xs) {
    std::vector<Var> rows;
    for (auto* x : xs) rows.push_back(lstm_state(tape, *x));
    return ops::stack_rows<Real>(tape, rows);
  }

  EncoderConfig cfg_;
  std::size_t vocab_size_;
  std::size_t num_actions_;
  Param<Real> word_, pos_;
  std::vector<Param<Real>> conv_w_, conv_b_;
  Param<Real> lstm_wx_, lstm_wh_, lstm_b_;
  Param<Real> head_w_, head_b_;

  std::uint64_t version_ = 1;
  std::size_t pos_hint_ = 0;
  std::shared_ptr<const Projection> cache_;
};

}  // namespace trajq
