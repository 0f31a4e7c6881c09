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

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsync/model.hpp"

namespace qsync {

/// Absolute tolerance on matrix 2-norm residuals of the synchronization conditions.
inline constexpr double kConditionTolerance = 1e-10;

/// Residuals of the three algebraic restrictions on (Omega, V, Gamma):
///   hamiltonian balance   Omega1 + Omega12 = Omega12^T + Omega2
///   kernel balance        the memory generator maps the synchronized subspace into itself
///   hamiltonian symmetry  Omega1 = Omega2 and Omega12 = Omega12^T
/// The first two together are sufficient for an initially synchronized
/// system to stay synchronized; the first and third are necessary.
struct ConditionReport {
  bool balance_holds = false;
  bool kernel_balance_holds = false;
  bool symmetry_holds = false;
  double balance_residual = 0.0;
  double kernel_balance_residual = 0.0;
  double symmetry_residual = 0.0;
  bool sufficient = false;          ///< balance and kernel balance
  bool necessary_violated = false;  ///< balance or symmetry fails
};

/// t_samples must be non-empty and contain 0. For exponential kernels the
/// kernel balance is additionally checked rate by rate, which is exact.
ConditionReport check_conditions(const AugmentedSystem& aug, std::span<const double> t_samples);

/// Sample times used when no grid is supplied.
std::vector<double> default_condition_samples(const AugmentedSystem& aug);

/// Thrown by error_dynamics when the sufficient conditions fail.
class ConditionError : public std::runtime_error {
 public:
  ConditionError(const std::string& what, ConditionReport report)
      : std::runtime_error(what), report_(report) {}
  const ConditionReport& report() const { return report_; }

 private:
  ConditionReport report_;
};

/// e' = E e + int_0^t F(t - s) e(s) ds for the synchronization error e = <xi1> - <xi2>.
struct ErrorDynamics {
  RealMatrix e_mat;
  KernelGenerator f;
  RealMatrix f_total;
  double f_norm_mass = 0.0;
  double f_mean_delay = 0.0;
  bool closed_form_moments = false;
};

ErrorDynamics error_dynamics(const AugmentedSystem& aug);

enum class CertificateCause {
  kPasses,
  kNotHurwitz,
  kDelayAboveThreshold,
  kUnboundedDelay,
};

std::string to_string(CertificateCause cause);

/// Sufficient asymptotic-stability certificate for the error dynamics:
/// E + int F is Hurwitz and the mean delay of ||F|| is below
/// 2 |Re l1|^N / (N (2||E|| + 2 F+)^N F+), N = dim E.
struct StabilityCertificate {
  bool hurwitz = false;
  Complex lambda1;
  double threshold = 0.0;   ///< +inf when F vanishes
  double mean_delay = 0.0;
  bool passes = false;
  CertificateCause cause = CertificateCause::kNotHurwitz;
  double e_norm = 0.0;
  double f_norm_mass = 0.0;
  int dimension = 0;
};

StabilityCertificate certify_stability(const ErrorDynamics& err);

/// Largest admissible mean delay of Gamma_n for the gain a, Gamma_n being the
/// top-left n x n block of the kernel (n = omega1.rows() / 2). Requires
/// a > ||J_n omega1||.
double gain_threshold(const RealMatrix& omega1, const MemoryKernel& kernel, double a);

/// Gain maximizing gain_threshold over a geometric grid, refined locally.
/// Empty when no gain satisfies mean_delay < threshold.
std::optional<double> find_gain(const RealMatrix& omega1, const MemoryKernel& kernel);

/// Engineered blocks for two copies of one subsystem.
struct SynthesisResult {
  double gain_a = 0.0;
  ComplexMatrix k_mat;
  RealMatrix omega12;
  ComplexMatrix v12;
  ComplexMatrix v21;
};

/// K = sqrt(a) [I_n ⊗ (1 i); 0], V12 = V21 = V1 - Gamma^{-1/2} K, Omega12 = 0.
/// Requires a > ||J_n Omega1||, n_fields >= n_modes and invertible kernel totals.
SynthesisResult synthesize(const SubsystemParams& sub, double a);

/// Two copies of sub joined by the synthesized blocks.
AugmentedSystem synchronized_system(const SubsystemParams& sub, const SynthesisResult& syn);

}  // namespace qsync
