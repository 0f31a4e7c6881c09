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

#include <deque>
#include <shared_mutex>
#include <span>
#include <vector>

#include "qsync/kernel.hpp"
#include "qsync/matops.hpp"

namespace qsync {

/// One exponential mode G * exp(-rate t) of a matrix-valued kernel.
struct ExpComponent {
  RealMatrix coefficient;
  double rate = 0.0;
};

/// Matrix-valued memory kernel t -> sum_j gamma_j(t) W_j.
///
/// Every generator in this library (A_K(t) of a subsystem or of the augmented
/// system, the error kernel F(t), condition imbalances) is linear in the
/// diagonal entries of Gamma(t), so it is stored as the scalar channels plus one
/// constant real weight matrix per channel. That keeps integrals and
/// exponential decompositions exact.
class KernelGenerator {
 public:
  KernelGenerator(std::vector<KernelChannel> channels, std::vector<RealMatrix> weights);

  /// Identically zero dim x dim generator.
  static KernelGenerator zero(int dim);

  int dim() const { return dim_; }
  std::span<const KernelChannel> channels() const { return channels_; }
  std::span<const RealMatrix> weights() const { return weights_; }
  bool is_exponential() const;

  /// Value at t >= 0. Decayed tabulated channels read as zero past their table.
  RealMatrix operator()(double t) const;
  /// Integral over [0, inf).
  RealMatrix integral() const;
  /// Terms grouped by rate (ascending). Groups whose coefficient is exactly
  /// zero are dropped. Throws std::logic_error for tabulated generators.
  std::vector<ExpComponent> exponential_terms() const;
  /// Time past which the generator is negligible (table end, or 60 slowest decay times).
  double decay_horizon() const;

 private:
  int dim_ = 0;
  std::vector<KernelChannel> channels_;
  std::vector<RealMatrix> weights_;
};

/// Integrals of ||G(t)|| for a KernelGenerator G.
struct NormMoments {
  double mass = 0.0;        ///< integral of ||G(t)||
  double mean_delay = 0.0;  ///< first moment of ||G(t)|| / mass; 0 when mass is 0
  bool closed_form = false; ///< true when computed from exact exponential integrals
};

/// Closed form when G(t) is diagonal with sign-definite exponential entries
/// (then ||G(t)|| is an envelope of positive exponential channels); adaptive
/// Gauss-Kronrod quadrature for other exponential generators; trapezoid for
/// tabulated ones.
NormMoments norm_moments(const KernelGenerator& g);

/// Caches evaluations of a generator on the uniform grid t_k = k * step.
/// at() may be called concurrently from several threads.
class MemoizedGenerator {
 public:
  MemoizedGenerator(KernelGenerator generator, double step);

  MemoizedGenerator(const MemoizedGenerator&) = delete;
  MemoizedGenerator& operator=(const MemoizedGenerator&) = delete;

  const KernelGenerator& generator() const { return generator_; }
  double step() const { return step_; }
  RealMatrix at(std::size_t k) const;

 private:
  KernelGenerator generator_;
  double step_;
  mutable std::shared_mutex mutex_;
  mutable std::deque<RealMatrix> cache_;
};

/// One non-Markovian linear subsystem (Omega, V, Gamma(t)).
///
/// Omega is symmetrized when its asymmetry is at most 1e-10 and rejected
/// otherwise. The coupling matrix has one row per kernel channel.
class SubsystemParams {
 public:
  static constexpr double kSymmetrizeTolerance = 1e-10;

  SubsystemParams(RealMatrix omega, ComplexMatrix v, MemoryKernel kernel);

  int n_modes() const { return static_cast<int>(omega_.rows() / 2); }
  int n_fields() const { return kernel_.size(); }
  const RealMatrix& omega() const { return omega_; }
  const ComplexMatrix& v() const { return v_; }
  const MemoryKernel& kernel() const { return kernel_; }

 private:
  RealMatrix omega_;
  ComplexMatrix v_;
  MemoryKernel kernel_;
};

/// Two subsystems with the engineered blocks Omega12, V12, V21.
class AugmentedSystem {
 public:
  AugmentedSystem(SubsystemParams sub1, SubsystemParams sub2, RealMatrix omega12, ComplexMatrix v12,
                  ComplexMatrix v21);

  /// No engineered coupling: Omega12 = 0, V12 = V21 = 0.
  static AugmentedSystem decoupled(SubsystemParams sub1, SubsystemParams sub2);

  int n_modes() const { return sub1_.n_modes(); }
  int n_fields() const { return sub1_.n_fields(); }
  const SubsystemParams& sub1() const { return sub1_; }
  const SubsystemParams& sub2() const { return sub2_; }
  const RealMatrix& omega12() const { return omega12_; }
  const ComplexMatrix& v12() const { return v12_; }
  const ComplexMatrix& v21() const { return v21_; }

  /// R = [[Omega1, Omega12], [Omega12^T, Omega2]].
  RealMatrix hamiltonian() const;
  /// V = [[V1, V12], [V21, V2]].
  ComplexMatrix coupling() const;
  /// diag(Gamma1(t), Gamma2(t)).
  MemoryKernel kernel() const;

 private:
  SubsystemParams sub1_;
  SubsystemParams sub2_;
  RealMatrix omega12_;
  ComplexMatrix v12_;
  ComplexMatrix v21_;
};

/// Generators of x' = A_H x + int_0^t A_K(t - s) x(s) ds + B b.
///
/// B multiplies the colored-noise input. Expectation dynamics from a vacuum
/// field state do not see it; it is assembled for completeness only.
struct GeneratorSet {
  RealMatrix a_h;
  KernelGenerator a_k;
  ComplexMatrix b;
};

/// Appends zero coupling rows and placeholder channels until the subsystem has
/// target_m fields. The generators are unchanged.
SubsystemParams pad_fields(const SubsystemParams& sub, int target_m);

GeneratorSet assemble_qsde(const SubsystemParams& sub);

/// Augmented generators, with A_K assembled block-wise per channel.
GeneratorSet augment(const AugmentedSystem& aug);

/// (sqrt2 Re a_1, sqrt2 Im a_1, ..., sqrt2 Re a_n, sqrt2 Im a_n).
RealVector coherent_expectations(std::span<const Complex> alphas);

}  // namespace qsync
