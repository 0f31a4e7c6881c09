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

#include "qsync/solver.hpp"

#include <cmath>
#include <ostream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace qsync {

namespace {

void check_inputs(const RealMatrix& e_mat, const RealVector& y0) {
  if (e_mat.rows() != e_mat.cols() || e_mat.rows() == 0) throw std::invalid_argument("solver: E must be square");
  if (y0.size() != e_mat.rows()) {
    throw std::invalid_argument("solver: initial state has length " + std::to_string(y0.size()) + ", expected " +
                                std::to_string(e_mat.rows()));
  }
  if (!e_mat.allFinite() || !y0.allFinite()) throw std::invalid_argument("solver: non-finite inputs");
}

void record(Trajectory& traj, double t, RealVector y) {
  const double nrm = y.norm();
  if (!std::isfinite(nrm) || nrm > kDivergenceNorm) throw DivergenceError(t, nrm);
  traj.times.push_back(t);
  traj.norms.push_back(nrm);
  traj.states.push_back(std::move(y));
}

}  // namespace

DivergenceError::DivergenceError(double time, double norm)
    : std::runtime_error(fmt::format("solver: state norm {:.3g} exceeded {:.0e} at t = {:.6g}; the dynamics diverge",
                                     norm, kDivergenceNorm, time)),
      time_(time),
      norm_(norm) {}

std::size_t IntegratorSpec::steps() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrator: dt must be finite and > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("integrator: horizon must be finite and > 0");
  if (dt > horizon) throw std::invalid_argument("integrator: dt must not exceed the horizon");
  return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
}

namespace {

// Convolution quadrature over a kernel grid accessor at(k) = F(k dt).
Trajectory convolution_quadrature(const RealMatrix& e_mat, const std::function<RealMatrix(std::size_t)>& at,
                                  const RealVector& y0, const IntegratorSpec& spec) {
  const std::size_t steps = spec.steps();
  const auto d = static_cast<std::size_t>(e_mat.rows());
  const double h = spec.dt;

  // Row-major kernel table F_k = F(k h), k = 0..steps, plus its memory window.
  std::vector<double> table((steps + 1) * d * d);
  std::vector<double> fnorm(steps + 1);
  double sup = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const RealMatrix fk = at(k);
    if (static_cast<std::size_t>(fk.rows()) != d || static_cast<std::size_t>(fk.cols()) != d) {
      throw std::invalid_argument("integrate_volterra: kernel dimension mismatch");
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        table[(k * d + i) * d + j] = fk(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    fnorm[k] = fk.norm();
    sup = std::max(sup, fnorm[k]);
  }
  std::size_t window = steps + 1;
  if (spec.kernel_cutoff > 0.0) {
    while (window > 1 && fnorm[window - 1] <= spec.kernel_cutoff * sup) --window;
  }

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.norms.reserve(steps + 1);
  if (window <= steps) traj.memory_window = static_cast<double>(window) * h;

  std::vector<double> ys((steps + 1) * d);
  for (std::size_t i = 0; i < d; ++i) ys[i] = y0(static_cast<Eigen::Index>(i));
  record(traj, 0.0, y0);

  // The endpoint term h/2 F(0) y(t) of the trapezoid rule is folded into E.
  const RealMatrix e_plus = e_mat + 0.5 * h * at(0);
  RealVector y = y0;
  RealVector slope = e_plus * y;
  RealVector hist(static_cast<Eigen::Index>(d));

  for (std::size_t n = 0; n < steps; ++n) {
    // h * sum_k w_k F((n+1-k) h) y_k over stored history k <= n, w_0 = 1/2.
    hist.setZero();
    const std::size_t lo = (n + 1 >= window) ? n + 2 - window : 0;
    for (std::size_t k = lo; k <= n; ++k) {
      const double w = (k == 0) ? 0.5 : 1.0;
      const double* fk = &table[(n + 1 - k) * d * d];
      const double* yk = &ys[k * d];
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += fk[i * d + j] * yk[j];
        hist(static_cast<Eigen::Index>(i)) += w * acc;
      }
    }
    hist *= h;

    const RealVector pred = y + h * slope;
    const RealVector pred_slope = e_plus * pred + hist;
    y += 0.5 * h * (slope + pred_slope);
    slope = e_plus * y + hist;

    for (std::size_t i = 0; i < d; ++i) ys[(n + 1) * d + i] = y(static_cast<Eigen::Index>(i));
    record(traj, static_cast<double>(n + 1) * h, y);
  }
  return traj;
}

}  // namespace

Trajectory integrate_volterra(const RealMatrix& e_mat, const MemoizedGenerator& f, const RealVector& y0,
                              const IntegratorSpec& spec) {
  check_inputs(e_mat, y0);
  if (std::abs(f.step() - spec.dt) > 1e-15 * spec.dt) {
    throw std::invalid_argument("integrate_volterra: kernel memo step differs from dt");
  }
  return convolution_quadrature(e_mat, [&f](std::size_t k) { return f.at(k); }, y0, spec);
}

Trajectory integrate_volterra(const RealMatrix& e_mat, const std::function<RealMatrix(double)>& f,
                              const RealVector& y0, const IntegratorSpec& spec) {
  check_inputs(e_mat, y0);
  const double h = spec.dt;
  return convolution_quadrature(e_mat, [&f, h](std::size_t k) { return f(static_cast<double>(k) * h); }, y0, spec);
}

Trajectory integrate_exponential_lift(const RealMatrix& e_mat, std::span<const ExpComponent> terms,
                                      const RealVector& y0, const IntegratorSpec& spec) {
  check_inputs(e_mat, y0);
  const std::size_t steps = spec.steps();
  const Eigen::Index d = e_mat.rows();
  const auto big = d * static_cast<Eigen::Index>(1 + terms.size());

  RealMatrix gen = RealMatrix::Zero(big, big);
  gen.topLeftCorner(d, d) = e_mat;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& c = terms[k];
    if (!(c.rate > 0.0)) throw std::invalid_argument("integrate_exponential_lift: rates must be > 0");
    if (c.coefficient.rows() != d || c.coefficient.cols() != d) {
      throw std::invalid_argument("integrate_exponential_lift: coefficient dimension mismatch");
    }
    const Eigen::Index off = d * static_cast<Eigen::Index>(k + 1);
    gen.block(0, off, d, d) = c.coefficient;
    gen.block(off, 0, d, d).setIdentity();
    gen.block(off, off, d, d) = -c.rate * RealMatrix::Identity(d, d);
  }

  // One RK4 step of a linear system is multiplication by the degree-4 Taylor
  // polynomial of exp(h * gen).
  const RealMatrix hm = spec.dt * gen;
  RealMatrix step = RealMatrix::Identity(big, big);
  RealMatrix power = RealMatrix::Identity(big, big);
  for (int p = 1; p <= 4; ++p) {
    power = (power * hm / static_cast<double>(p)).eval();
    step += power;
  }

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.norms.reserve(steps + 1);
  RealVector x = RealVector::Zero(big);
  x.head(d) = y0;
  record(traj, 0.0, y0);
  for (std::size_t n = 0; n < steps; ++n) {
    x = (step * x).eval();
    record(traj, static_cast<double>(n + 1) * spec.dt, x.head(d));
  }
  return traj;
}

Trajectory integrate(const RealMatrix& e_mat, const KernelGenerator& f, const RealVector& y0,
                     const IntegratorSpec& spec) {
  if (spec.method == IntegratorMethod::kExponentialLift) {
    if (!f.is_exponential()) {
      throw std::invalid_argument("solver: the exponential lift needs exponential kernels; use convolution quadrature");
    }
    const auto terms = f.exponential_terms();
    return integrate_exponential_lift(e_mat, terms, y0, spec);
  }
  const MemoizedGenerator memo(f, spec.dt);
  return integrate_volterra(e_mat, memo, y0, spec);
}

Trajectory error_projection(const Trajectory& full) {
  Trajectory err;
  err.times = full.times;
  err.memory_window = full.memory_window;
  err.states.reserve(full.states.size());
  err.norms.reserve(full.states.size());
  for (const auto& x : full.states) {
    const Eigen::Index h = x.size() / 2;
    RealVector e = x.head(h) - x.tail(h);
    err.norms.push_back(e.norm());
    err.states.push_back(std::move(e));
  }
  return err;
}

AugmentedTrajectory simulate_augmented(const GeneratorSet& gens, const MemoizedGenerator* a_k_memo,
                                       const RealVector& xi0, const IntegratorSpec& spec) {
  if (xi0.size() % 4 != 0 || xi0.size() != gens.a_h.rows()) {
    throw std::invalid_argument("simulate_augmented: initial expectation vector has length " +
                                std::to_string(xi0.size()) + ", expected " + std::to_string(gens.a_h.rows()));
  }
  AugmentedTrajectory out;
  if (spec.method == IntegratorMethod::kConvolutionQuadrature && a_k_memo != nullptr) {
    out.state = integrate_volterra(gens.a_h, *a_k_memo, xi0, spec);
  } else {
    out.state = integrate(gens.a_h, gens.a_k, xi0, spec);
  }
  out.error = error_projection(out.state);
  return out;
}

AugmentedTrajectory simulate_augmented(const AugmentedSystem& aug, const RealVector& xi0, const IntegratorSpec& spec) {
  return simulate_augmented(augment(aug), nullptr, xi0, spec);
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  const std::size_t dim = traj.states.empty() ? 0 : static_cast<std::size_t>(traj.states.front().size());
  out << 't';
  for (std::size_t i = 1; i <= dim; ++i) out << ",x" << i;
  out << ",norm\n";
  fmt::memory_buffer buf;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{:.12g}", traj.times[k]);
    for (std::size_t i = 0; i < dim; ++i) {
      fmt::format_to(std::back_inserter(buf), ",{:.12g}", traj.states[k](static_cast<Eigen::Index>(i)));
    }
    fmt::format_to(std::back_inserter(buf), ",{:.12g}\n", traj.norms[k]);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

}  // namespace qsync
