/* Copyright 2026 The QSync Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qsync/kernel.hpp"
#include "qsync/matops.hpp"
#include "qsync/model.hpp"

namespace qsync::testing {

// Worked example: Omega1 = [[0, .1], [.1, 0]], V1 = (0.2, -0.1i), gamma(t) = 9 exp(-9t).
inline RealMatrix example_omega() {
  RealMatrix m(2, 2);
  m << 0.0, 0.1, 0.1, 0.0;
  return m;
}

inline ComplexMatrix example_v() {
  ComplexMatrix v(1, 2);
  v << Complex(0.2, 0.0), Complex(0.0, -0.1);
  return v;
}

inline MemoryKernel example_kernel() { return MemoryKernel::single_exponential(1.0, 9.0); }

inline SubsystemParams example_subsystem() { return SubsystemParams(example_omega(), example_v(), example_kernel()); }

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * ((i % 2 != 0) ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Entrywise Simpson integral of a matrix function.
inline RealMatrix simpson_matrix(const std::function<RealMatrix(double)>& f, double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  RealMatrix s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * ((i % 2 != 0) ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// 2 J Im(V^† G V) by explicit loops in complex arithmetic, for a diagonal G.
inline RealMatrix brute_force_generator(const ComplexMatrix& v, const RealVector& gamma_diag) {
  const auto m = v.rows();
  const auto d = v.cols();
  ComplexMatrix prod = ComplexMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Complex acc(0.0, 0.0);
      for (Eigen::Index k = 0; k < m; ++k) acc += std::conj(v(k, i)) * gamma_diag(k) * v(k, j);
      prod(i, j) = acc;
    }
  }
  RealMatrix im(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) im(i, j) = prod(i, j).imag();
  }
  RealMatrix out = RealMatrix::Zero(d, d);
  for (Eigen::Index r = 0; r + 1 < d; r += 2) {
    // J = I ⊗ [[0, 1], [-1, 0]]: row 2k gets +row 2k+1, row 2k+1 gets -row 2k.
    out.row(r) = 2.0 * im.row(r + 1);
    out.row(r + 1) = -2.0 * im.row(r);
  }
  return out;
}

/// Fixed-seed generator of random test inputs.
class Gen {
 public:
  explicit Gen(unsigned seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  RealMatrix matrix(int rows, int cols, double scale = 1.0) {
    RealMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = uniform(-scale, scale);
    }
    return m;
  }

  /// Symmetric 2n x 2n matrix with 2-norm at most max_norm.
  RealMatrix symmetric(int dim, double max_norm) {
    RealMatrix a = matrix(dim, dim);
    RealMatrix s = 0.5 * (a + a.transpose());
    const double nrm = norm2(s);
    if (nrm > 0.0) s *= uniform(0.05, max_norm) / nrm;
    return s;
  }

  ComplexMatrix complex_matrix(int rows, int cols, double scale = 1.0) {
    ComplexMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = Complex(uniform(-scale, scale), uniform(-scale, scale));
    }
    return m;
  }

  KernelChannel exp_channel(int max_terms = 3) {
    std::vector<ExpTerm> terms;
    const int count = integer(1, max_terms);
    for (int k = 0; k < count; ++k) terms.push_back({uniform(0.2, 2.0), uniform(0.5, 12.0)});
    return KernelChannel::exponential(std::move(terms));
  }

  MemoryKernel exp_kernel(int channels, int max_terms = 3) {
    std::vector<KernelChannel> ch;
    for (int j = 0; j < channels; ++j) ch.push_back(exp_channel(max_terms));
    return MemoryKernel(std::move(ch));
  }

  SubsystemParams subsystem(int n, int m) {
    return SubsystemParams(symmetric(2 * n, 1.0), complex_matrix(m, 2 * n), exp_kernel(m));
  }

  std::mt19937& engine() { return rng_; }

 private:
  std::mt19937 rng_;
};

}  // namespace qsync::testing
