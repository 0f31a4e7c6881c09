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

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace qsync {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Spectral abscissa must sit below -kHurwitzMargin for a matrix to count as Hurwitz.
inline constexpr double kHurwitzMargin = 1e-10;

/// Raised when the dense eigensolver or SVD fails to converge.
class EigenSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symplectic form J_n = I_n ⊗ [[0,1],[-1,0]] in interleaved (q1,p1,q2,p2,...) ordering.
RealMatrix symplectic(int n);

/// Orthogonal projections onto the synchronized subspace {xi1 = xi2} of R^{4n}
/// and onto its complement.
struct SyncProjections {
  RealMatrix pi;
  RealMatrix pi_perp;
};

SyncProjections sync_projections(int n);

/// Eigenvalues plus extreme singular values of a square real matrix.
///
/// Eigenvalues are sorted by real part descending, ties broken by imaginary
/// part descending, so eigenvalues.front() is the eigenvalue with the largest
/// real part.
struct SpectralSummary {
  std::vector<Complex> eigenvalues;
  double spectral_abscissa = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  const Complex& leading() const { return eigenvalues.front(); }
  bool hurwitz(double margin = kHurwitzMargin) const { return spectral_abscissa < -margin; }
};

SpectralSummary spectral_summary(const RealMatrix& a);

/// Largest singular value. Empty matrices have norm 0.
double norm2(const RealMatrix& a);
double norm2(const ComplexMatrix& a);

bool all_finite(const RealMatrix& a);
bool all_finite(const ComplexMatrix& a);

// Block views of a 4n x 4n matrix D = [[D11, D12], [D21, D22]] with 2n x 2n blocks.

/// D11 - D21 + D12 - D22; Pi_perp * D * Pi = 1/4 [[X, X], [-X, -X]] for this X.
RealMatrix leakage_block(const RealMatrix& d);

/// D11 - D21; when Pi_perp * D * Pi = 0, Pi_perp * D * Pi_perp = 1/2 [[X, -X], [-X, X]].
RealMatrix error_block(const RealMatrix& d);

}  // namespace qsync
