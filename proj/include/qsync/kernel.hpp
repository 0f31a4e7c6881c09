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

#include <span>
#include <variant>
#include <vector>

#include "qsync/matops.hpp"

namespace qsync {

/// One term c * beta * exp(-beta t) of an exponential-sum channel. The weight c
/// is the term's integral over [0, inf).
struct ExpTerm {
  double weight = 0.0;
  double rate = 0.0;
};

/// A single diagonal entry gamma(t) of a memory kernel.
///
/// Two forms are supported: a positive exponential sum, and a uniformly
/// sampled table starting at t = 0 that is linearly interpolated. Tables are
/// assumed to have decayed by their last sample; past the table a decayed
/// channel reads as zero (see value_or_zero).
class KernelChannel {
 public:
  /// Last table sample must be at most this fraction of the table's peak.
  static constexpr double kTailTolerance = 1e-8;

  static KernelChannel exponential(std::vector<ExpTerm> terms);
  static KernelChannel tabulated(double step, std::vector<double> samples);

  bool is_exponential() const { return std::holds_alternative<ExpSum>(form_); }

  /// gamma(t). Throws for t < 0 or t past the end of a table.
  double value(double t) const;
  /// gamma(t), but zero past the end of a decayed table.
  double value_or_zero(double t) const;

  /// Integral over [0, inf).
  double total() const;
  /// Integral of t * gamma(t) over [0, inf).
  double first_moment() const;

  /// Exponential terms; empty for tables.
  std::span<const ExpTerm> terms() const;
  /// Table spacing, sample values and end time; zero/empty for exponential sums.
  double step() const;
  std::span<const double> samples() const;
  double table_end() const;
  bool tail_decayed() const;

  /// Smallest and largest exponential rate (exponential channels only).
  double min_rate() const;
  double max_rate() const;

 private:
  struct ExpSum {
    std::vector<ExpTerm> terms;
  };
  struct Table {
    double step;
    std::vector<double> samples;
  };
  explicit KernelChannel(std::variant<ExpSum, Table> form) : form_(std::move(form)) {}

  std::variant<ExpSum, Table> form_;
};

/// Diagonal memory kernel Gamma(t) = diag(gamma_1(t), ..., gamma_M(t)).
class MemoryKernel {
 public:
  explicit MemoryKernel(std::vector<KernelChannel> channels);

  /// Single channel c * beta * exp(-beta t).
  static MemoryKernel single_exponential(double weight, double rate);

  int size() const { return static_cast<int>(channels_.size()); }
  const KernelChannel& channel(int j) const { return channels_.at(static_cast<std::size_t>(j)); }
  std::span<const KernelChannel> channels() const { return channels_; }
  bool is_exponential() const;

  /// diag(gamma_1(t), ..., gamma_M(t)).
  RealMatrix eval(double t) const;
  /// Per-channel integrals over [0, inf).
  RealVector totals() const;

  /// Kernel with extra placeholder channels (unit-total exponential, rate 1)
  /// appended until it has target_m channels.
  MemoryKernel padded(int target_m) const;
  /// First count channels.
  MemoryKernel leading(int count) const;

 private:
  std::vector<KernelChannel> channels_;
};

/// Moments of the top-left top_n x top_n block Gamma_n(t).
struct KernelMoments {
  RealMatrix total;        ///< diag of per-channel integrals (top_n x top_n)
  double norm_mass = 0.0;  ///< integral of ||Gamma_n(t)|| = max_j gamma_j(t)
  double mean_delay = 0.0; ///< first moment of ||Gamma_n(t)|| / norm_mass
};

/// Integrals of the upper envelope max_j f_j(t) of a set of channels.
struct EnvelopeIntegrals {
  double mass = 0.0;
  double first_moment = 0.0;
};

/// Closed form on the crossover partition for exponential channels,
/// trapezoid quadrature when any channel is tabulated.
EnvelopeIntegrals envelope_integrals(std::span<const KernelChannel> channels);

KernelMoments moments(const MemoryKernel& kernel, int top_n);

/// diag(total_j^{-1/2}). Throws if any total is below 1e-12.
RealMatrix inverse_sqrt_total(const MemoryKernel& kernel);

/// Equal top-left totals (absolute tolerance 1e-10) and mean delay no larger
/// than the reference's.
bool kernel_dominates(const MemoryKernel& k, const MemoryKernel& k_ref, int top_n);

}  // namespace qsync
