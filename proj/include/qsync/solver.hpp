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

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsync/model.hpp"

namespace qsync {

enum class IntegratorMethod {
  kConvolutionQuadrature,
  kExponentialLift,
};

/// Fixed-step integration settings.
///
/// Convolution quadrature stores the full history: memory grows with
/// horizon / dt and work with its square, unless kernel_cutoff > 0 lets it drop
/// history older than the time after which ||F|| stays below
/// kernel_cutoff * sup ||F|| on the grid.
struct IntegratorSpec {
  IntegratorMethod method = IntegratorMethod::kConvolutionQuadrature;
  double dt = 1e-3;
  double horizon = 20.0;
  double kernel_cutoff = 1e-12;

  /// Number of steps; throws when dt or horizon is invalid.
  std::size_t steps() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<RealVector> states;
  std::vector<double> norms;
  /// Memory window used by convolution quadrature, when history was truncated.
  std::optional<double> memory_window;
};

/// State norm passed 1e12 before the horizon.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double time, double norm);
  double time() const { return time_; }
  double norm() const { return norm_; }

 private:
  double time_;
  double norm_;
};

inline constexpr double kDivergenceNorm = 1e12;

/// y' = E y + int_0^t F(t - s) y(s) ds by trapezoidal convolution quadrature
/// with a Heun (trapezoidal predictor-corrector) step. Second order in dt.
/// F is read on the grid t_k = k * dt from the memo, whose step must equal dt.
Trajectory integrate_volterra(const RealMatrix& e_mat, const MemoizedGenerator& f, const RealVector& y0,
                              const IntegratorSpec& spec);

/// Same, for an arbitrary kernel function.
Trajectory integrate_volterra(const RealMatrix& e_mat, const std::function<RealMatrix(double)>& f,
                              const RealVector& y0, const IntegratorSpec& spec);

/// Exact state-space lift for F(t) = sum_k G_k exp(-rate_k t): with
/// z_k(t) = int_0^t exp(-rate_k (t - s)) y(s) ds,
///   y' = E y + sum_k G_k z_k,   z_k' = y - rate_k z_k,   z_k(0) = 0,
/// integrated by classical fourth-order Runge-Kutta.
Trajectory integrate_exponential_lift(const RealMatrix& e_mat, std::span<const ExpComponent> terms,
                                      const RealVector& y0, const IntegratorSpec& spec);

/// Dispatches on spec.method. The lift needs an exponential generator.
Trajectory integrate(const RealMatrix& e_mat, const KernelGenerator& f, const RealVector& y0,
                     const IntegratorSpec& spec);

struct AugmentedTrajectory {
  Trajectory state;  ///< <xi(t)>, length 4n
  Trajectory error;  ///< e(t) = <xi1(t)> - <xi2(t)>, length 2n
};

/// Expectation dynamics of the augmented system from the expectation vector xi0.
AugmentedTrajectory simulate_augmented(const AugmentedSystem& aug, const RealVector& xi0, const IntegratorSpec& spec);

/// Same, reusing a memo of A_K on the grid (convolution quadrature only; ignored by the lift).
AugmentedTrajectory simulate_augmented(const GeneratorSet& gens, const MemoizedGenerator* a_k_memo,
                                       const RealVector& xi0, const IntegratorSpec& spec);

/// Difference of the first and second halves of every state.
Trajectory error_projection(const Trajectory& full);

/// CSV with header t,x1,...,xD,norm; 12 significant digits.
void write_csv(const Trajectory& traj, std::ostream& out);

}  // namespace qsync
