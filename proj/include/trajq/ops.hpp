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

// Differentiable primitives recorded on a Tape.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajq/linalg.hpp"
#include "trajq/tape.hpp"
#include "trajq/tensor.hpp"

namespace trajq {

// Huber loss with the transition at |x| = 1.
template <class Real>
Real huber(Real x) {
  Real a = std::abs(x);
  return a <= Real{1} ? Real{0.5} * x * x : a - Real{0.5};
}

template <class Real>
Real huber_derivative(Real x) {
  return std::clamp(x, Real{-1}, Real{1});
}

enum class PoolMode { kMax, kMean };

namespace ops {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <class Real>
std::pair<std::size_t, std::size_t> matrix_dims(const Tape<Real>& t, Var v,
                                                const char* op) {
  const Shape& s = t.shape(v);
  require(s.size() == 2, std::string(op) + ": expected a matrix, got " + shape_string(s));
  return {s[0], s[1]};
}

}  // namespace detail

template <class Real>
Var add(Tape<Real>& t, Var a, Var b) {
  detail::require(t.shape(a) == t.shape(b), "add: shape mismatch " +
                                                 shape_string(t.shape(a)) + " vs " +
                                                 shape_string(t.shape(b)));
  auto x = t.value(a), y = t.value(b);
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return t.record(t.shape(a), std::move(out), {a, b}, [a, b](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v)) continue;
      auto gv = tp.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

template <class Real>
Var sub(Tape<Real>& t, Var a, Var b) {
  detail::require(t.shape(a) == t.shape(b), "sub: shape mismatch " +
                                                 shape_string(t.shape(a)) + " vs " +
                                                 shape_string(t.shape(b)));
  auto x = t.value(a), y = t.value(b);
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return t.record(t.shape(a), std::move(out), {a, b}, [a, b](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    if (tp.requires_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      auto gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <class Real>
Var hadamard(Tape<Real>& t, Var a, Var b) {
  detail::require(t.shape(a) == t.shape(b), "hadamard: shape mismatch " +
                                                 shape_string(t.shape(a)) + " vs " +
                                                 shape_string(t.shape(b)));
  auto x = t.value(a), y = t.value(b);
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return t.record(t.shape(a), std::move(out), {a, b}, [a, b](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    auto x = tp.value(a), y = tp.value(b);
    if (tp.requires_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (tp.requires_grad(b)) {
      auto gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

template <class Real>
Var scale(Tape<Real>& t, Var x, Real c) {
  auto in = t.value(x);
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = c * in[i];
  return t.record(t.shape(x), std::move(out), {x}, [x, c](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    auto gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
  });
}

// Elementwise map where the derivative is expressed through (input, output).
template <class Real, class F, class DF>
Var map(Tape<Real>& t, Var x, F f, DF df) {
  auto in = t.value(x);
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return t.record(t.shape(x), std::move(out), {x}, [x, df](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    auto in = tp.value(x);
    auto y = tp.value(o);
    auto gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], y[i]);
  });
}

template <class Real>
Var sigmoid(Tape<Real>& t, Var x) {
  return map(
      t, x, [](Real v) { return Real{1} / (Real{1} + std::exp(-v)); },
      [](Real, Real y) { return y * (Real{1} - y); });
}

template <class Real>
Var tanh(Tape<Real>& t, Var x) {
  return map(
      t, x, [](Real v) { return std::tanh(v); },
      [](Real, Real y) { return Real{1} - y * y; });
}

template <class Real>
Var relu(Tape<Real>& t, Var x) {
  return map(
      t, x, [](Real v) { return v > Real{0} ? v : Real{0}; },
      [](Real v, Real) { return v > Real{0} ? Real{1} : Real{0}; });
}

template <class Real>
Var huber(Tape<Real>& t, Var x) {
  return map(
      t, x, [](Real v) { return trajq::huber(v); },
      [](Real v, Real) { return huber_derivative(v); });
}

// [m x k] * [k x n]
template <class Real>
Var matmul(Tape<Real>& t, Var a, Var b) {
  auto [m, k] = detail::matrix_dims(t, a, "matmul");
  auto [k2, n] = detail::matrix_dims(t, b, "matmul");
  detail::require(k == k2, "matmul: inner dimensions differ");
  std::vector<Real> out(m * n);
  linalg::gemm_nn(t.value(a).data(), t.value(b).data(), out.data(), m, k, n, false);
  return t.record({m, n}, std::move(out), {a, b},
                  [a, b, m = m, k = k, n = n](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    if (tp.requires_grad(a)) {
                      linalg::gemm_nt(g.data(), tp.value(b).data(), tp.grad(a).data(), m,
                                      n, k, true);
                    }
                    if (tp.requires_grad(b)) {
                      linalg::gemm_tn(tp.value(a).data(), g.data(), tp.grad(b).data(), k,
                                      m, n, true);
                    }
                  });
}

// x[m x k] * w[n x k]^T + b[n]  (b optional)
template <class Real>
Var affine(Tape<Real>& t, Var x, Var w, const Var* b = nullptr) {
  auto [m, k] = detail::matrix_dims(t, x, "affine");
  auto [n, k2] = detail::matrix_dims(t, w, "affine");
  detail::require(k == k2, "affine: input width " + std::to_string(k) +
                               " does not match weight width " + std::to_string(k2));
  if (b) detail::require(t.numel_of(*b) == n, "affine: bias length mismatch");
  std::vector<Real> out(m * n);
  linalg::gemm_nt(t.value(x).data(), t.value(w).data(), out.data(), m, k, n, false);
  Var bias = b ? *b : x;
  if (b) {
    auto bv = t.value(*b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  bool has_bias = b != nullptr;
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return t.record({m, n}, std::move(out), std::span<const Var>(inputs),
                  [x, w, bias, has_bias, m = m, k = k, n = n](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    if (tp.requires_grad(x)) {
                      linalg::gemm_nn(g.data(), tp.value(w).data(), tp.grad(x).data(), m,
                                      n, k, true);
                    }
                    if (tp.requires_grad(w)) {
                      linalg::gemm_tn(g.data(), tp.value(x).data(), tp.grad(w).data(), n,
                                      m, k, true);
                    }
                    if (has_bias && tp.requires_grad(bias)) {
                      auto gb = tp.grad(bias);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                    }
                  });
}

template <class Real>
Var affine(Tape<Real>& t, Var x, Var w, Var b) {
  return affine(t, x, w, &b);
}

// Same data under a new shape of equal size.
template <class Real>
Var reshape(Tape<Real>& t, Var x, Shape shape) {
  detail::require(numel(shape) == t.numel_of(x), "reshape: " + shape_string(t.shape(x)) +
                                                     " cannot become " + shape_string(shape));
  auto v = t.value(x);
  return t.record(std::move(shape), std::vector<Real>(v.begin(), v.end()), {x},
                  [x](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    auto gx = tp.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  });
}

// Rows of `table` [V x D] selected by `ids`.
template <class Real>
Var gather_rows(Tape<Real>& t, Var table, std::span<const std::size_t> ids) {
  auto [rows, d] = detail::matrix_dims(t, table, "gather_rows");
  auto tv = t.value(table);
  std::vector<Real> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::require(ids[i] < rows, "gather_rows: id " + std::to_string(ids[i]) +
                                       " out of range for table with " +
                                       std::to_string(rows) + " rows");
    std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return t.record({ids.size(), d}, std::move(out), {table},
                  [table, idx = std::move(idx), d = d](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    auto gt = tp.grad(table);
                    for (std::size_t i = 0; i < idx.size(); ++i)
                      for (std::size_t c = 0; c < d; ++c) gt[idx[i] * d + c] += g[i * d + c];
                  });
}

template <class Real>
Var slice_rows(Tape<Real>& t, Var x, std::size_t begin, std::size_t count) {
  auto [m, n] = detail::matrix_dims(t, x, "slice_rows");
  detail::require(begin + count <= m, "slice_rows: range out of bounds");
  auto v = t.value(x);
  std::vector<Real> out(v.begin() + begin * n, v.begin() + (begin + count) * n);
  return t.record({count, n}, std::move(out), {x},
                  [x, begin, n = n](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    auto gx = tp.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
                  });
}

template <class Real>
Var slice_cols(Tape<Real>& t, Var x, std::size_t begin, std::size_t count) {
  auto [m, n] = detail::matrix_dims(t, x, "slice_cols");
  detail::require(begin + count <= n, "slice_cols: range out of bounds");
  auto v = t.value(x);
  std::vector<Real> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(v.begin() + i * n + begin, count, out.begin() + i * count);
  return t.record({m, count}, std::move(out), {x},
                  [x, begin, count, m = m, n = n](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    auto gx = tp.grad(x);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < count; ++j)
                        gx[i * n + begin + j] += g[i * count + j];
                  });
}

// Horizontal concatenation of matrices with equal row counts.
template <class Real>
Var concat_cols(Tape<Real>& t, std::span<const Var> parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  std::size_t m = detail::matrix_dims(t, parts[0], "concat_cols").first;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    auto [rows, cols] = detail::matrix_dims(t, p, "concat_cols");
    detail::require(rows == m, "concat_cols: row counts differ");
    widths.push_back(cols);
    total += cols;
  }
  std::vector<Real> out(m * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = t.value(parts[p]);
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.begin() + i * widths[p], widths[p], out.begin() + i * total + offset);
    offset += widths[p];
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.record({m, total}, std::move(out), parts,
                  [ins, widths, m, total](Tape<Real>& tp, Var o) {
                    auto g = tp.grad(o);
                    std::size_t offset = 0;
                    for (std::size_t p = 0; p < ins.size(); ++p) {
                      if (tp.requires_grad(ins[p])) {
                        auto gp = tp.grad(ins[p]);
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < widths[p]; ++j)
                            gp[i * widths[p] + j] += g[i * total + offset + j];
                      }
                      offset += widths[p];
                    }
                  });
}

// Stacks equal-length rows (each [n] or [1 x n]) into an [m x n] matrix.
template <class Real>
Var stack_rows(Tape<Real>& t, std::span<const Var> rows) {
  detail::require(!rows.empty(), "stack_rows: no inputs");
  std::size_t n = t.numel_of(rows[0]);
  std::vector<Real> out;
  out.reserve(rows.size() * n);
  for (Var r : rows) {
    detail::require(t.numel_of(r) == n, "stack_rows: row lengths differ");
    auto v = t.value(r);
    out.insert(out.end(), v.begin(), v.end());
  }
  std::vector<Var> ins(rows.begin(), rows.end());
  return t.record({rows.size(), n}, std::move(out), rows, [ins, n](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    for (std::size_t r = 0; r < ins.size(); ++r) {
      if (!tp.requires_grad(ins[r])) continue;
      auto gr = tp.grad(ins[r]);
      for (std::size_t j = 0; j < n; ++j) gr[j] += g[r * n + j];
    }
  });
}

// One-dimensional convolution along time.
//
// input [L x D], filters [K x k x D], bias [K], pad [D] (the start-of-sentence
// embedding). The input is left-padded with k-1 copies of `pad`, so output
// column t is the response to the window ending at token t and the output is
// [K x L].
template <class Real>
Var conv1d(Tape<Real>& t, Var input, Var filters, Var bias, Var pad) {
  auto [len, d] = detail::matrix_dims(t, input, "conv1d");
  const Shape& fs = t.shape(filters);
  detail::require(fs.size() == 3 && fs[2] == d,
                  "conv1d: filters must be [K x k x " + std::to_string(d) + "], got " +
                      shape_string(fs));
  detail::require(len >= 1, "conv1d: empty input");
  const std::size_t nf = fs[0], k = fs[1];
  detail::require(t.numel_of(bias) == nf, "conv1d: bias length mismatch");
  detail::require(t.numel_of(pad) == d, "conv1d: pad row length mismatch");

  auto x = t.value(input), w = t.value(filters), b = t.value(bias), p = t.value(pad);
  auto row = [&](std::ptrdiff_t i) -> const Real* {
    return i < 0 ? p.data() : x.data() + std::size_t(i) * d;
  };
  std::vector<Real> out(nf * len);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t tt = 0; tt < len; ++tt) {
      Real acc = b[f];
      for (std::size_t j = 0; j < k; ++j) {
        const Real* xr = row(std::ptrdiff_t(tt + j) - std::ptrdiff_t(k - 1));
        const Real* wr = w.data() + (f * k + j) * d;
        for (std::size_t c = 0; c < d; ++c) acc += wr[c] * xr[c];
      }
      out[f * len + tt] = acc;
    }
  }
  return t.record(
      {nf, len}, std::move(out), {input, filters, bias, pad},
      [=, len = len, d = d](Tape<Real>& tp, Var o) {
        auto g = tp.grad(o);
        auto x = tp.value(input), w = tp.value(filters), p = tp.value(pad);
        std::span<Real> gx, gw, gb, gp;
        if (tp.requires_grad(input)) gx = tp.grad(input);
        if (tp.requires_grad(filters)) gw = tp.grad(filters);
        if (tp.requires_grad(bias)) gb = tp.grad(bias);
        if (tp.requires_grad(pad)) gp = tp.grad(pad);
        for (std::size_t f = 0; f < nf; ++f) {
          for (std::size_t tt = 0; tt < len; ++tt) {
            const Real go = g[f * len + tt];
            if (go == Real{0}) continue;
            if (!gb.empty()) gb[f] += go;
            for (std::size_t j = 0; j < k; ++j) {
              std::ptrdiff_t i = std::ptrdiff_t(tt + j) - std::ptrdiff_t(k - 1);
              const Real* xr = i < 0 ? p.data() : x.data() + std::size_t(i) * d;
              const Real* wr = w.data() + (f * k + j) * d;
              if (!gw.empty()) {
                Real* gwr = gw.data() + (f * k + j) * d;
                for (std::size_t c = 0; c < d; ++c) gwr[c] += go * xr[c];
              }
              Real* gxr = nullptr;
              if (i < 0) {
                if (!gp.empty()) gxr = gp.data();
              } else if (!gx.empty()) {
                gxr = gx.data() + std::size_t(i) * d;
              }
              if (gxr)
                for (std::size_t c = 0; c < d; ++c) gxr[c] += go * wr[c];
            }
          }
        }
      });
}

struct PoolResult {
  Var out;
  // Per filter, the time index selected by max pooling (empty for mean).
  std::vector<std::size_t> argmax;
};

// Pools a [K x L] feature matrix over time into [K]. Max pooling keeps the
// first maximizer on ties and routes gradient only to it.
template <class Real>
PoolResult pool_over_time(Tape<Real>& t, Var features, PoolMode mode) {
  auto [nf, len] = detail::matrix_dims(t, features, "pool_over_time");
  detail::require(len >= 1, "pool_over_time: empty time axis");
  auto v = t.value(features);
  std::vector<Real> out(nf);
  PoolResult res;
  if (mode == PoolMode::kMax) {
    res.argmax.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const Real* r = v.data() + f * len;
      std::size_t best = 0;
      for (std::size_t i = 1; i < len; ++i)
        if (r[i] > r[best]) best = i;
      res.argmax[f] = best;
      out[f] = r[best];
    }
    res.out = t.record({nf}, std::move(out), {features},
                       [features, arg = res.argmax, len = len](Tape<Real>& tp, Var o) {
                         auto g = tp.grad(o);
                         auto gf = tp.grad(features);
                         for (std::size_t f = 0; f < arg.size(); ++f)
                           gf[f * len + arg[f]] += g[f];
                       });
  } else {
    for (std::size_t f = 0; f < nf; ++f) {
      Real s = 0;
      for (std::size_t i = 0; i < len; ++i) s += v[f * len + i];
      out[f] = s / Real(len);
    }
    res.out = t.record({nf}, std::move(out), {features},
                       [features, len = len](Tape<Real>& tp, Var o) {
                         auto g = tp.grad(o);
                         auto gf = tp.grad(features);
                         for (std::size_t f = 0; f < g.size(); ++f) {
                           Real share = g[f] / Real(len);
                           for (std::size_t i = 0; i < len; ++i) gf[f * len + i] += share;
                         }
                       });
  }
  return res;
}

// Picks q[b, cols[b]] from a [B x A] matrix into [B].
template <class Real>
Var select_cols(Tape<Real>& t, Var q, std::span<const std::size_t> cols) {
  auto [rows, n] = detail::matrix_dims(t, q, "select_cols");
  detail::require(cols.size() == rows, "select_cols: one column per row required");
  auto v = t.value(q);
  std::vector<Real> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    detail::require(cols[i] < n, "select_cols: column out of range");
    out[i] = v[i * n + cols[i]];
  }
  std::vector<std::size_t> c(cols.begin(), cols.end());
  return t.record({rows}, std::move(out), {q}, [q, c = std::move(c), n = n](Tape<Real>& tp, Var o) {
    auto g = tp.grad(o);
    auto gq = tp.grad(q);
    for (std::size_t i = 0; i < c.size(); ++i) gq[i * n + c[i]] += g[i];
  });
}

template <class Real>
Var sum(Tape<Real>& t, Var x) {
  Real s = 0;
  for (Real v : t.value(x)) s += v;
  return t.record({1}, {s}, {x}, [x](Tape<Real>& tp, Var o) {
    Real g = tp.grad(o)[0];
    for (Real& gx : tp.grad(x)) gx += g;
  });
}

// (1/n) * sum_i weights[i] * x[i]
template <class Real>
Var weighted_mean(Tape<Real>& t, Var x, std::span<const Real> weights) {
  const std::size_t n = t.numel_of(x);
  detail::require(weights.size() == n, "weighted_mean: weight count mismatch");
  detail::require(n > 0, "weighted_mean: empty input");
  auto v = t.value(x);
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += weights[i] * v[i];
  std::vector<Real> w(weights.begin(), weights.end());
  return t.record({1}, {s / Real(n)}, {x}, [x, w = std::move(w)](Tape<Real>& tp, Var o) {
    Real g = tp.grad(o)[0] / Real(w.size());
    auto gx = tp.grad(x);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
  });
}

}  // namespace ops
}  // namespace trajq
