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

#include "qsync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qsync {

namespace {

RealMatrix im_product(const ComplexMatrix& x, const ComplexMatrix& y) { return (x.adjoint() * y).imag(); }

// Difference of the two sides of the kernel balance, channel by channel,
// over the concatenated channels of both subsystems.
KernelGenerator kernel_imbalance(const AugmentedSystem& aug) {
  std::vector<KernelChannel> chans;
  std::vector<RealMatrix> weights;
  for (int j = 0; j < aug.n_fields(); ++j) {
    const ComplexMatrix v1 = aug.sub1().v().row(j), v12 = aug.v12().row(j);
    chans.push_back(aug.sub1().kernel().channel(j));
    weights.push_back(im_product(v1, v1) + im_product(v1, v12) - im_product(v12, v1) - im_product(v12, v12));
  }
  for (int j = 0; j < aug.n_fields(); ++j) {
    const ComplexMatrix v21 = aug.v21().row(j), v2 = aug.sub2().v().row(j);
    chans.push_back(aug.sub2().kernel().channel(j));
    weights.push_back(im_product(v21, v21) + im_product(v21, v2) - im_product(v2, v21) - im_product(v2, v2));
  }
  return KernelGenerator(std::move(chans), std::move(weights));
}

// Threshold on the mean delay of the kernel block for gain a; all
// gain-independent quantities precomputed.
struct GainProblem {
  int n = 0;
  double jw_norm = 0.0;
  double lambda1_re = 0.0;
  double norm_mass = 0.0;
  double mean_delay = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  GainProblem(const RealMatrix& omega1, const MemoryKernel& kernel) {
    if (omega1.rows() == 0 || omega1.rows() != omega1.cols() || omega1.rows() % 2 != 0) {
      throw std::invalid_argument("gain threshold: omega1 must be 2n x 2n");
    }
    n = static_cast<int>(omega1.rows() / 2);
    if (kernel.size() < n) {
      throw std::invalid_argument("gain threshold: kernel has fewer channels than modes; pad the fields first");
    }
    const RealMatrix jw = symplectic(n) * omega1;
    jw_norm = norm2(jw);
    lambda1_re = spectral_summary(jw).leading().real();
    const auto m = moments(kernel, n);
    norm_mass = m.norm_mass;
    mean_delay = m.mean_delay;
    sigma_min = m.total.diagonal().minCoeff();
    sigma_max = m.total.diagonal().maxCoeff();
  }

  double threshold(double a) const {
    if (!(a > jw_norm)) {
      throw std::invalid_argument("gain threshold: gain " + std::to_string(a) + " must exceed ||J omega1|| = " +
                                  std::to_string(jw_norm));
    }
    const double ratio = 2.0 * a * norm_mass / sigma_min;
    const double num = std::pow(std::abs(lambda1_re - a), 2 * n) * sigma_min;
    const double den = n * std::pow(2.0 * jw_norm + ratio, 2 * n) * ratio * sigma_max;
    return num / den;
  }
};

}  // namespace

std::vector<double> default_condition_samples(const AugmentedSystem& aug) {
  std::vector<double> t{0.0, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  for (const auto* sub : {&aug.sub1(), &aug.sub2()}) {
    for (const auto& ch : sub->kernel().channels()) {
      if (ch.is_exponential()) continue;
      const std::size_t count = ch.samples().size();
      const std::size_t stride = std::max<std::size_t>(1, count / 256);
      for (std::size_t k = 0; k < count; k += stride) t.push_back(static_cast<double>(k) * ch.step());
    }
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

ConditionReport check_conditions(const AugmentedSystem& aug, std::span<const double> t_samples) {
  if (t_samples.empty()) throw std::invalid_argument("check_conditions: no sample times");
  if (std::find(t_samples.begin(), t_samples.end(), 0.0) == t_samples.end()) {
    throw std::invalid_argument("check_conditions: sample times must include t = 0");
  }
  const RealMatrix& w1 = aug.sub1().omega();
  const RealMatrix& w2 = aug.sub2().omega();
  const RealMatrix& w12 = aug.omega12();

  ConditionReport r;
  r.balance_residual = norm2(RealMatrix(w1 + w12 - w12.transpose() - w2));

  const KernelGenerator imbalance = kernel_imbalance(aug);
  for (double t : t_samples) r.kernel_balance_residual = std::max(r.kernel_balance_residual, norm2(imbalance(t)));
  if (imbalance.is_exponential()) {
    for (const auto& c : imbalance.exponential_terms()) {
      r.kernel_balance_residual = std::max(r.kernel_balance_residual, norm2(c.coefficient));
    }
  }

  r.symmetry_residual = std::max(norm2(RealMatrix(w1 - w2)), norm2(RealMatrix(w12 - w12.transpose())));

  r.balance_holds = r.balance_residual <= kConditionTolerance;
  r.kernel_balance_holds = r.kernel_balance_residual <= kConditionTolerance;
  r.symmetry_holds = r.symmetry_residual <= kConditionTolerance;
  r.sufficient = r.balance_holds && r.kernel_balance_holds;
  r.necessary_violated = !r.balance_holds || !r.symmetry_holds;
  return r;
}

ErrorDynamics error_dynamics(const AugmentedSystem& aug) {
  const auto samples = default_condition_samples(aug);
  const auto report = check_conditions(aug, samples);
  if (!report.sufficient) {
    throw ConditionError("error_dynamics: the synchronized subspace is not invariant (hamiltonian balance residual " +
                             std::to_string(report.balance_residual) + ", kernel balance residual " +
                             std::to_string(report.kernel_balance_residual) + ")",
                         report);
  }

  const int n = aug.n_modes();
  const RealMatrix two_j = 2.0 * symplectic(n);

  std::vector<KernelChannel> chans;
  std::vector<RealMatrix> weights;
  for (int j = 0; j < aug.n_fields(); ++j) {
    const ComplexMatrix v1 = aug.sub1().v().row(j), v12 = aug.v12().row(j);
    chans.push_back(aug.sub1().kernel().channel(j));
    weights.push_back(two_j * (im_product(v1, v1) - im_product(v12, v1)));
  }
  for (int j = 0; j < aug.n_fields(); ++j) {
    const ComplexMatrix v21 = aug.v21().row(j), v2 = aug.sub2().v().row(j);
    chans.push_back(aug.sub2().kernel().channel(j));
    weights.push_back(two_j * (im_product(v21, v21) - im_product(v2, v21)));
  }

  ErrorDynamics err{two_j * (aug.sub1().omega() - aug.omega12().transpose()),
                    KernelGenerator(std::move(chans), std::move(weights)), RealMatrix(), 0.0, 0.0, false};
  err.f_total = err.f.integral();
  const auto nm = norm_moments(err.f);
  err.f_norm_mass = nm.mass;
  err.f_mean_delay = nm.mean_delay;
  err.closed_form_moments = nm.closed_form;
  return err;
}

std::string to_string(CertificateCause cause) {
  switch (cause) {
    case CertificateCause::kPasses: return "passes";
    case CertificateCause::kNotHurwitz: return "not_hurwitz";
    case CertificateCause::kDelayAboveThreshold: return "mean_delay_not_below_threshold";
    case CertificateCause::kUnboundedDelay: return "mean_delay_unbounded";
  }
  return "unknown";
}

StabilityCertificate certify_stability(const ErrorDynamics& err) {
  StabilityCertificate c;
  c.dimension = static_cast<int>(err.e_mat.rows());
  c.e_norm = norm2(err.e_mat);
  c.f_norm_mass = err.f_norm_mass;
  c.mean_delay = err.f_mean_delay;

  if (err.f_norm_mass <= 1e-14) {
    const auto s = spectral_summary(err.e_mat);
    c.lambda1 = s.leading();
    c.hurwitz = s.hurwitz();
    c.threshold = std::numeric_limits<double>::infinity();
    c.passes = c.hurwitz;
    c.cause = c.passes ? CertificateCause::kPasses : CertificateCause::kNotHurwitz;
    return c;
  }

  const auto s = spectral_summary(RealMatrix(err.e_mat + err.f_total));
  c.lambda1 = s.leading();
  c.hurwitz = s.hurwitz();
  const int big_n = c.dimension;
  c.threshold = 2.0 * std::pow(std::abs(c.lambda1.real()), big_n) /
                (big_n * std::pow(2.0 * c.e_norm + 2.0 * err.f_norm_mass, big_n) * err.f_norm_mass);

  if (!std::isfinite(err.f_mean_delay) || !std::isfinite(err.f_norm_mass)) {
    c.cause = CertificateCause::kUnboundedDelay;
  } else if (!c.hurwitz) {
    c.cause = CertificateCause::kNotHurwitz;
  } else if (!(c.mean_delay < c.threshold)) {
    c.cause = CertificateCause::kDelayAboveThreshold;
  } else {
    c.cause = CertificateCause::kPasses;
  }
  c.passes = c.cause == CertificateCause::kPasses;
  return c;
}

double gain_threshold(const RealMatrix& omega1, const MemoryKernel& kernel, double a) {
  return GainProblem(omega1, kernel).threshold(a);
}

std::optional<double> find_gain(const RealMatrix& omega1, const MemoryKernel& kernel) {
  const GainProblem problem(omega1, kernel);

  // Eight points per octave of the offset a - ||J omega1||, spanning 2^40.
  constexpr int kSteps = 320;
  std::vector<double> grid;
  grid.reserve(kSteps + 1);
  for (int k = 0; k <= kSteps; ++k) {
    const double octave = static_cast<double>(k) / 8.0;
    grid.push_back(problem.jw_norm > 1e-12 ? problem.jw_norm * (1.0 + std::exp2(octave) / 100.0)
                                           : std::exp2(octave - 20.0));
  }

  std::size_t best = 0;
  double best_thr = -1.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double thr = problem.threshold(grid[k]);
    if (thr > best_thr) {
      best_thr = thr;
      best = k;
    }
  }

  // Golden-section refinement between the best point's neighbours.
  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  double best_a = grid[best];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80 && hi - lo > 1e-14 * hi; ++it) {
    const double x1 = hi - phi * (hi - lo);
    const double x2 = lo + phi * (hi - lo);
    if (problem.threshold(x1) >= problem.threshold(x2)) hi = x2;
    else lo = x1;
  }
  const double refined = 0.5 * (lo + hi);
  if (const double thr = problem.threshold(refined); thr > best_thr) {
    best_thr = thr;
    best_a = refined;
  }

  if (best_thr > problem.mean_delay) return best_a;
  return std::nullopt;
}

SynthesisResult synthesize(const SubsystemParams& sub, double a) {
  const int n = sub.n_modes();
  const int m = sub.n_fields();
  if (m < n) {
    throw std::invalid_argument("synthesize: " + std::to_string(m) + " fields for " + std::to_string(n) +
                                " modes; pad the fields first");
  }
  const double jw_norm = norm2(RealMatrix(symplectic(n) * sub.omega()));
  if (!(a > jw_norm)) {
    throw std::invalid_argument("synthesize: gain " + std::to_string(a) + " must exceed ||J omega1|| = " +
                                std::to_string(jw_norm));
  }

  SynthesisResult r;
  r.gain_a = a;
  r.k_mat = ComplexMatrix::Zero(m, 2 * n);
  const double s = std::sqrt(a);
  for (int i = 0; i < n; ++i) {
    r.k_mat(i, 2 * i) = Complex(s, 0.0);
    r.k_mat(i, 2 * i + 1) = Complex(0.0, s);
  }
  r.v12 = sub.v() - inverse_sqrt_total(sub.kernel()).cast<Complex>() * r.k_mat;
  r.v21 = r.v12;
  r.omega12 = RealMatrix::Zero(2 * n, 2 * n);
  return r;
}

AugmentedSystem synchronized_system(const SubsystemParams& sub, const SynthesisResult& syn) {
  return AugmentedSystem(sub, sub, syn.omega12, syn.v12, syn.v21);
}

}  // namespace qsync
