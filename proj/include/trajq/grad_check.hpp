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

// Central finite-difference check of tape gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajq/tensor.hpp"

namespace trajq {

struct GradCheckOptions {
  double step = 1e-5;
  // Entries sampled per parameter; every entry is checked when the parameter
  // is at most this large.
  std::size_t samples_per_param = 64;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// `loss(with_grad)` evaluates the scalar loss for the current parameter
// values and, when `with_grad` is set, leaves d(loss)/d(param) in each
// Param::grad.
//
// `numeric_loss`, when given, is used for the perturbed evaluations instead
// of `loss`; it lets a single-precision model be differenced in double
// precision at identical parameter values.
template <class Real>
GradCheckReport grad_check(std::span<Param<Real>* const> params,
                           const std::function<double(bool with_grad)>& loss,
                           const GradCheckOptions& options = {},
                           const std::function<double()>& numeric_loss = {}) {
  loss(true);
  std::vector<std::vector<Real>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  auto eval = [&]() { return numeric_loss ? numeric_loss() : loss(false); };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param<Real>& p = *params[pi];
    std::vector<std::size_t> picks;
    if (p.size() <= options.samples_per_param) {
      for (std::size_t i = 0; i < p.size(); ++i) picks.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> dist(0, p.size() - 1);
      for (std::size_t s = 0; s < options.samples_per_param; ++s) picks.push_back(dist(rng));
    }
    for (std::size_t idx : picks) {
      const Real saved = p.value.data[idx];
      p.value.data[idx] = static_cast<Real>(double(saved) + options.step);
      const double up_step = double(p.value.data[idx]) - double(saved);
      const double up = eval();
      p.value.data[idx] = static_cast<Real>(double(saved) - options.step);
      const double down_step = double(saved) - double(p.value.data[idx]);
      const double down = eval();
      p.value.data[idx] = saved;
      const double numeric = (up - down) / (up_step + down_step);
      const double a = analytic[pi].empty() ? 0.0 : double(analytic[pi][idx]);
      const double err = relative_error(a, numeric);
      ++report.checked;
      if (err > report.max_relative_error || report.checked == 1) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        if (err >= report.max_relative_error) {
          report.worst_param = p.name;
          report.worst_index = idx;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace trajq
