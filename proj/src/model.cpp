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

#include "qsync/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qsync {

namespace {

constexpr double kDecayHorizon = 60.0;

// 2 J Im(x^dagger y) for coupling rows x, y (1 x 2n each).
RealMatrix channel_weight(const RealMatrix& two_j, const ComplexMatrix& x, const ComplexMatrix& y) {
  return two_j * (x.adjoint() * y).imag();
}

ComplexMatrix noise_input(int n, const ComplexMatrix& v) {
  ComplexMatrix stacked(v.cols(), 2 * v.rows());
  stacked << -v.adjoint(), v.transpose();
  return Complex(0.0, 1.0) * symplectic(n).cast<Complex>() * stacked;
}

std::string dims(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

// --- KernelGenerator -------------------------------------------------------------

KernelGenerator::KernelGenerator(std::vector<KernelChannel> channels, std::vector<RealMatrix> weights)
    : channels_(std::move(channels)), weights_(std::move(weights)) {
  if (channels_.size() != weights_.size()) {
    throw std::invalid_argument("KernelGenerator: channel and weight counts differ");
  }
  if (weights_.empty()) throw std::invalid_argument("KernelGenerator: needs at least one channel");
  dim_ = static_cast<int>(weights_.front().rows());
  for (const auto& w : weights_) {
    if (w.rows() != dim_ || w.cols() != dim_) throw std::invalid_argument("KernelGenerator: weights must share a square shape");
  }
}

KernelGenerator KernelGenerator::zero(int dim) {
  return KernelGenerator({KernelChannel::exponential({{1.0, 1.0}})}, {RealMatrix::Zero(dim, dim)});
}

bool KernelGenerator::is_exponential() const {
  return std::all_of(channels_.begin(), channels_.end(), [](const auto& c) { return c.is_exponential(); });
}

RealMatrix KernelGenerator::operator()(double t) const {
  RealMatrix out = RealMatrix::Zero(dim_, dim_);
  for (std::size_t j = 0; j < channels_.size(); ++j) {
    if (weights_[j].isZero(0.0)) continue;
    out.noalias() += channels_[j].value_or_zero(t) * weights_[j];
  }
  return out;
}

RealMatrix KernelGenerator::integral() const {
  RealMatrix out = RealMatrix::Zero(dim_, dim_);
  for (std::size_t j = 0; j < channels_.size(); ++j) out.noalias() += channels_[j].total() * weights_[j];
  return out;
}

std::vector<ExpComponent> KernelGenerator::exponential_terms() const {
  if (!is_exponential()) throw std::logic_error("KernelGenerator: tabulated channels have no exponential decomposition");
  std::vector<ExpComponent> raw;
  for (std::size_t j = 0; j < channels_.size(); ++j) {
    if (weights_[j].isZero(0.0)) continue;
    for (const auto& term : channels_[j].terms()) {
      raw.push_back({term.weight * term.rate * weights_[j], term.rate});
    }
  }
  std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.rate < b.rate; });
  std::vector<ExpComponent> grouped;
  for (auto& c : raw) {
    if (!grouped.empty() && std::abs(grouped.back().rate - c.rate) <= 1e-14 * c.rate) {
      grouped.back().coefficient += c.coefficient;
    } else {
      grouped.push_back(std::move(c));
    }
  }
  std::erase_if(grouped, [](const auto& c) { return c.coefficient.isZero(0.0); });
  return grouped;
}

double KernelGenerator::decay_horizon() const {
  double h = 0.0;
  for (const auto& ch : channels_) {
    h = std::max(h, ch.is_exponential() ? kDecayHorizon / ch.min_rate() : ch.table_end());
  }
  return h;
}

// --- norm moments ----------------------------------------------------------------

NormMoments norm_moments(const KernelGenerator& g) {
  if (g.is_exponential()) {
    const auto terms = g.exponential_terms();
    if (terms.empty()) return {0.0, 0.0, true};

    double scale = 0.0;
    for (const auto& c : terms) scale = std::max(scale, c.coefficient.cwiseAbs().maxCoeff());
    const double tiny = 1e-12 * scale;
    bool diagonal = true;
    for (const auto& c : terms) {
      RealMatrix off = c.coefficient;
      off.diagonal().setZero();
      if (off.cwiseAbs().maxCoeff() > tiny) diagonal = false;
    }

    if (diagonal) {
      // Each diagonal entry sum_k g_ik exp(-rate_k t); sign-definite entries
      // have |entry| equal to a positive exponential channel.
      std::vector<KernelChannel> entries;
      bool definite = true;
      for (int i = 0; i < g.dim() && definite; ++i) {
        std::vector<ExpTerm> pos, neg;
        for (const auto& c : terms) {
          const double gi = c.coefficient(i, i);
          if (std::abs(gi) <= tiny) continue;
          (gi > 0 ? pos : neg).push_back({std::abs(gi) / c.rate, c.rate});
        }
        if (!pos.empty() && !neg.empty()) definite = false;
        else if (!pos.empty()) entries.push_back(KernelChannel::exponential(std::move(pos)));
        else if (!neg.empty()) entries.push_back(KernelChannel::exponential(std::move(neg)));
      }
      if (definite) {
        if (entries.empty()) return {0.0, 0.0, true};
        const auto env = envelope_integrals(entries);
        return {env.mass, env.first_moment / env.mass, true};
      }
    }

    using boost::math::quadrature::gauss_kronrod;
    const double horizon = g.decay_horizon();
    auto norm_at = [&](double t) { return norm2(g(t)); };
    auto tnorm_at = [&](double t) { return t * norm2(g(t)); };
    const double mass = gauss_kronrod<double, 31>::integrate(norm_at, 0.0, horizon, 20, 1e-12);
    const double first = gauss_kronrod<double, 31>::integrate(tnorm_at, 0.0, horizon, 20, 1e-12);
    if (mass <= 0.0) return {0.0, 0.0, false};
    return {mass, first / mass, false};
  }

  double h = std::numeric_limits<double>::infinity();
  for (const auto& ch : g.channels()) {
    h = std::min(h, ch.is_exponential() ? 1e-2 / ch.max_rate() : 0.25 * ch.step());
  }
  const double horizon = g.decay_horizon();
  const auto count = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9)) + 1;
  double mass = 0.0, first = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * h;
    const double w = (k == 0 || k + 1 == count) ? 0.5 * h : h;
    const double v = norm2(g(t));
    mass += w * v;
    first += w * t * v;
  }
  if (mass <= 0.0) return {0.0, 0.0, false};
  return {mass, first / mass, false};
}

// --- MemoizedGenerator -------------------------------------------------------------

MemoizedGenerator::MemoizedGenerator(KernelGenerator generator, double step)
    : generator_(std::move(generator)), step_(step) {
  if (!(step > 0.0)) throw std::invalid_argument("MemoizedGenerator: step must be > 0");
}

RealMatrix MemoizedGenerator::at(std::size_t k) const {
  {
    std::shared_lock lock(mutex_);
    if (k < cache_.size()) return cache_[k];
  }
  std::unique_lock lock(mutex_);
  while (cache_.size() <= k) cache_.push_back(generator_(static_cast<double>(cache_.size()) * step_));
  return cache_[k];
}

// --- parameter sets ----------------------------------------------------------------

SubsystemParams::SubsystemParams(RealMatrix omega, ComplexMatrix v, MemoryKernel kernel)
    : omega_(std::move(omega)), v_(std::move(v)), kernel_(std::move(kernel)) {
  if (omega_.rows() == 0 || omega_.rows() != omega_.cols() || omega_.rows() % 2 != 0) {
    throw std::invalid_argument("subsystem: omega must be 2n x 2n with n >= 1, got " + dims(omega_.rows(), omega_.cols()));
  }
  if (!all_finite(omega_)) throw std::invalid_argument("subsystem: omega has non-finite entries");
  const double asym = (omega_ - omega_.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetrizeTolerance) {
    throw std::invalid_argument("subsystem: omega is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
  omega_ = 0.5 * (omega_ + omega_.transpose()).eval();

  if (v_.cols() != omega_.rows()) {
    throw std::invalid_argument("subsystem: coupling matrix must have " + std::to_string(omega_.rows()) +
                                " columns, got " + std::to_string(v_.cols()));
  }
  if (v_.rows() != kernel_.size()) {
    throw std::invalid_argument("subsystem: coupling matrix has " + std::to_string(v_.rows()) +
                                " rows but the kernel has " + std::to_string(kernel_.size()) + " channels");
  }
  if (!all_finite(v_)) throw std::invalid_argument("subsystem: coupling matrix has non-finite entries");
}

AugmentedSystem::AugmentedSystem(SubsystemParams sub1, SubsystemParams sub2, RealMatrix omega12, ComplexMatrix v12,
                                 ComplexMatrix v21)
    : sub1_(std::move(sub1)), sub2_(std::move(sub2)), omega12_(std::move(omega12)), v12_(std::move(v12)),
      v21_(std::move(v21)) {
  if (sub1_.n_modes() != sub2_.n_modes()) throw std::invalid_argument("augmented: subsystems have different mode counts");
  if (sub1_.n_fields() != sub2_.n_fields()) throw std::invalid_argument("augmented: subsystems have different field counts");
  const Eigen::Index d = 2 * sub1_.n_modes();
  const Eigen::Index m = sub1_.n_fields();
  if (omega12_.rows() != d || omega12_.cols() != d) {
    throw std::invalid_argument("augmented: omega12 must be " + dims(d, d) + ", got " + dims(omega12_.rows(), omega12_.cols()));
  }
  if (v12_.rows() != m || v12_.cols() != d) {
    throw std::invalid_argument("augmented: v12 must be " + dims(m, d) + ", got " + dims(v12_.rows(), v12_.cols()));
  }
  if (v21_.rows() != m || v21_.cols() != d) {
    throw std::invalid_argument("augmented: v21 must be " + dims(m, d) + ", got " + dims(v21_.rows(), v21_.cols()));
  }
  if (!all_finite(omega12_) || !all_finite(v12_) || !all_finite(v21_)) {
    throw std::invalid_argument("augmented: engineered blocks have non-finite entries");
  }
}

AugmentedSystem AugmentedSystem::decoupled(SubsystemParams sub1, SubsystemParams sub2) {
  const Eigen::Index d = 2 * sub1.n_modes();
  const Eigen::Index m = sub1.n_fields();
  return AugmentedSystem(std::move(sub1), std::move(sub2), RealMatrix::Zero(d, d), ComplexMatrix::Zero(m, d),
                         ComplexMatrix::Zero(m, d));
}

RealMatrix AugmentedSystem::hamiltonian() const {
  const Eigen::Index d = omega12_.rows();
  RealMatrix r(2 * d, 2 * d);
  r << sub1_.omega(), omega12_, omega12_.transpose(), sub2_.omega();
  return r;
}

ComplexMatrix AugmentedSystem::coupling() const {
  const Eigen::Index d = omega12_.rows();
  const Eigen::Index m = v12_.rows();
  ComplexMatrix v(2 * m, 2 * d);
  v << sub1_.v(), v12_, v21_, sub2_.v();
  return v;
}

MemoryKernel AugmentedSystem::kernel() const {
  std::vector<KernelChannel> chans(sub1_.kernel().channels().begin(), sub1_.kernel().channels().end());
  chans.insert(chans.end(), sub2_.kernel().channels().begin(), sub2_.kernel().channels().end());
  return MemoryKernel(std::move(chans));
}

// --- generator assembly --------------------------------------------------------------

SubsystemParams pad_fields(const SubsystemParams& sub, int target_m) {
  if (target_m < sub.n_fields()) {
    throw std::invalid_argument("pad_fields: target field count " + std::to_string(target_m) +
                                " is below the current " + std::to_string(sub.n_fields()));
  }
  ComplexMatrix v = ComplexMatrix::Zero(target_m, sub.v().cols());
  v.topRows(sub.n_fields()) = sub.v();
  return SubsystemParams(sub.omega(), std::move(v), sub.kernel().padded(target_m));
}

GeneratorSet assemble_qsde(const SubsystemParams& sub) {
  const int n = sub.n_modes();
  const RealMatrix two_j = 2.0 * symplectic(n);
  std::vector<KernelChannel> chans(sub.kernel().channels().begin(), sub.kernel().channels().end());
  std::vector<RealMatrix> weights;
  weights.reserve(chans.size());
  for (int j = 0; j < sub.n_fields(); ++j) {
    const ComplexMatrix row = sub.v().row(j);
    weights.push_back(channel_weight(two_j, row, row));
  }
  return {two_j * sub.omega(), KernelGenerator(std::move(chans), std::move(weights)), noise_input(n, sub.v())};
}

GeneratorSet augment(const AugmentedSystem& aug) {
  const int n = aug.n_modes();
  const Eigen::Index d = 2 * n;
  const RealMatrix two_j = 2.0 * symplectic(n);

  auto block_weight = [&](const ComplexMatrix& left, const ComplexMatrix& right) {
    RealMatrix w(2 * d, 2 * d);
    w << channel_weight(two_j, left, left), channel_weight(two_j, left, right), channel_weight(two_j, right, left),
        channel_weight(two_j, right, right);
    return w;
  };

  std::vector<KernelChannel> chans;
  std::vector<RealMatrix> weights;
  for (int j = 0; j < aug.n_fields(); ++j) {
    chans.push_back(aug.sub1().kernel().channel(j));
    weights.push_back(block_weight(aug.sub1().v().row(j), aug.v12().row(j)));
  }
  for (int j = 0; j < aug.n_fields(); ++j) {
    chans.push_back(aug.sub2().kernel().channel(j));
    weights.push_back(block_weight(aug.v21().row(j), aug.sub2().v().row(j)));
  }
  return {2.0 * symplectic(2 * n) * aug.hamiltonian(), KernelGenerator(std::move(chans), std::move(weights)),
          noise_input(2 * n, aug.coupling())};
}

RealVector coherent_expectations(std::span<const Complex> alphas) {
  RealVector x(2 * static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    x(2 * static_cast<Eigen::Index>(k)) = std::sqrt(2.0) * alphas[k].real();
    x(2 * static_cast<Eigen::Index>(k) + 1) = std::sqrt(2.0) * alphas[k].imag();
  }
  return x;
}

}  // namespace qsync
