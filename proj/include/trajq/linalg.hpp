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

// Row-major GEMM kernels over flat buffers, backed by Eigen.

#pragma once

#include <Eigen/Core>
#include <cstddef>

namespace trajq::linalg {

template <class Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using MapC = Eigen::Map<const RowMat<Real>>;
template <class Real>
using Map = Eigen::Map<RowMat<Real>>;

// c[m x n] (+)= a[m x k] * b[k x n]
template <class Real>
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  Map<Real> C(c, m, n);
  if (accumulate) {
    C.noalias() += MapC<Real>(a, m, k) * MapC<Real>(b, k, n);
  } else {
    C.noalias() = MapC<Real>(a, m, k) * MapC<Real>(b, k, n);
  }
}

// c[m x n] (+)= a[m x k] * b[n x k]^T
template <class Real>
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  Map<Real> C(c, m, n);
  if (accumulate) {
    C.noalias() += MapC<Real>(a, m, k) * MapC<Real>(b, n, k).transpose();
  } else {
    C.noalias() = MapC<Real>(a, m, k) * MapC<Real>(b, n, k).transpose();
  }
}

// c[m x n] (+)= a[k x m]^T * b[k x n]
template <class Real>
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  Map<Real> C(c, m, n);
  if (accumulate) {
    C.noalias() += MapC<Real>(a, k, m).transpose() * MapC<Real>(b, k, n);
  } else {
    C.noalias() = MapC<Real>(a, k, m).transpose() * MapC<Real>(b, k, n);
  }
}

}  // namespace trajq::linalg
