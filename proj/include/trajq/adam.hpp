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

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajq/tensor.hpp"

namespace trajq {

// Per-parameter first/second moments for bias-corrected Adam.
template <class Real>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;

  void reset(std::span<Param<Real>* const> params) {
    step = 0;
    m.clear();
    v.clear();
    for (auto* p : params) {
      m.emplace_back(p->size(), Real{0});
      v.emplace_back(p->size(), Real{0});
    }
  }
};

// Applies one Adam update from the gradients stored on `params`.
template <class Real>
void adam_step(std::span<Param<Real>* const> params, double lr, AdamState<Real>& state) {
  if (state.m.empty() && !params.empty()) state.reset(params);
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size() || state.v[i].size() != params[i]->size()) {
      throw ShapeError("adam_step: moment shape mismatch for " + params[i]->name);
    }
    if (params[i]->grad.size() != params[i]->size()) {
      throw ShapeError("adam_step: missing gradient for " + params[i]->name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Real b1 = static_cast<Real>(state.beta1), b2 = static_cast<Real>(state.beta2);
  const Real c1 = static_cast<Real>(1.0 - std::pow(state.beta1, t));
  const Real c2 = static_cast<Real>(1.0 - std::pow(state.beta2, t));
  const Real step_size = static_cast<Real>(lr);
  const Real eps = static_cast<Real>(state.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->value.data.size();
    Real* __restrict w = params[i]->value.data.data();
    const Real* __restrict g = params[i]->grad.data();
    Real* __restrict m = state.m[i].data();
    Real* __restrict v = state.v[i].data();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (Real{1} - b1) * g[j];
      v[j] = b2 * v[j] + (Real{1} - b2) * g[j] * g[j];
      const Real mhat = m[j] / c1;
      const Real vhat = v[j] / c2;
      w[j] -= step_size * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace trajq
