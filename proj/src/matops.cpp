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

#include "qsync/matops.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace qsync {

RealMatrix symplectic(int n) {
  if (n < 1) {
    throw std::invalid_argument("symplectic: mode count must be >= 1, got " + std::to_string(n));
  }
  RealMatrix j = RealMatrix::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    j(2 * k, 2 * k + 1) = 1.0;
    j(2 * k + 1, 2 * k) = -1.0;
  }
  return j;
}

SyncProjections sync_projections(int n) {
  if (n < 1) {
    throw std::invalid_argument("sync_projections: mode count must be >= 1, got " + std::to_string(n));
  }
  const int d = 2 * n;
  const RealMatrix id = RealMatrix::Identity(d, d);
  SyncProjections p{RealMatrix(2 * d, 2 * d), RealMatrix(2 * d, 2 * d)};
  p.pi << id, id, id, id;
  p.pi_perp << id, -id, -id, id;
  p.pi *= 0.5;
  p.pi_perp *= 0.5;
  return p;
}

SpectralSummary spectral_summary(const RealMatrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw std::invalid_argument("spectral_summary: matrix must be square and non-empty");
  }
  if (!all_finite(a)) {
    throw std::invalid_argument("spectral_summary: matrix has non-finite entries");
  }

  Eigen::EigenSolver<RealMatrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw EigenSolverError("spectral_summary: eigensolver did not converge");
  }
  Eigen::JacobiSVD<RealMatrix> svd(a);
  if (svd.info() != Eigen::Success) {
    throw EigenSolverError("spectral_summary: SVD did not converge");
  }

  SpectralSummary out;
  const auto& ev = es.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  out.spectral_abscissa = out.eigenvalues.front().real();
  const auto& sv = svd.singularValues();
  out.sigma_max = sv(0);
  out.sigma_min = sv(sv.size() - 1);
  return out;
}

double norm2(const RealMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<RealMatrix> svd(a);
  return svd.singularValues()(0);
}

double norm2(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues()(0);
}

bool all_finite(const RealMatrix& a) { return a.allFinite(); }

bool all_finite(const ComplexMatrix& a) {
  return a.real().allFinite() && a.imag().allFinite();
}

namespace {

void require_even_square(const RealMatrix& d, const char* what) {
  if (d.rows() != d.cols() || d.rows() % 4 != 0 || d.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": expected a 4n x 4n matrix");
  }
}

}  // namespace

RealMatrix leakage_block(const RealMatrix& d) {
  require_even_square(d, "leakage_block");
  const Eigen::Index h = d.rows() / 2;
  return d.topLeftCorner(h, h) - d.bottomLeftCorner(h, h) + d.topRightCorner(h, h) -
         d.bottomRightCorner(h, h);
}

RealMatrix error_block(const RealMatrix& d) {
  require_even_square(d, "error_block");
  const Eigen::Index h = d.rows() / 2;
  return d.topLeftCorner(h, h) - d.bottomLeftCorner(h, h);
}

}  // namespace qsync
