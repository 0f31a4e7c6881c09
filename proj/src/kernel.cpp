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

#include "qsync/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qsync {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Horizon (in units of the slowest decay time) past which exponential
// channels are treated as fully decayed when locating crossovers.
constexpr double kDecayHorizon = 60.0;

// Integrals of c*beta*exp(-beta t) and t*c*beta*exp(-beta t) over [a, b], b may be +inf.
double exp_mass(const ExpTerm& term, double a, double b) {
  const double tail_b = std::isinf(b) ? 0.0 : std::exp(-term.rate * b);
  return term.weight * (std::exp(-term.rate * a) - tail_b);
}

double exp_first(const ExpTerm& term, double a, double b) {
  const double inv = 1.0 / term.rate;
  const double tail_b = std::isinf(b) ? 0.0 : (b + inv) * std::exp(-term.rate * b);
  return term.weight * ((a + inv) * std::exp(-term.rate * a) - tail_b);
}

double trapezoid(std::span<const double> y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

void require_decayed(const KernelChannel& ch) {
  if (!ch.is_exponential() && !ch.tail_decayed()) {
    throw std::invalid_argument(
        "kernel: tabulated channel has not decayed by its last sample (last sample must be <= 1e-8 * peak)");
  }
}

// Locate t in (lo, hi) where d changes sign, d(lo) * d(hi) < 0.
template <typename F>
double bisect(const F& d, double lo, double hi) {
  double dlo = d(lo);
  for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double dm = d(mid);
    if (dm == 0.0) return mid;
    if ((dm > 0) == (dlo > 0)) {
      lo = mid;
      dlo = dm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

EnvelopeIntegrals exponential_envelope(std::span<const KernelChannel> channels) {
  double rmin = kInf, rmax = 0.0;
  for (const auto& ch : channels) {
    rmin = std::min(rmin, ch.min_rate());
    rmax = std::max(rmax, ch.max_rate());
  }
  const double t_end = kDecayHorizon / rmin;

  // Geometric sampling grid: resolves both fast early structure and slow tails.
  std::vector<double> grid{0.0};
  for (double t = 1e-4 / rmax; t < t_end; t *= 1.005) grid.push_back(t);
  grid.push_back(t_end);

  const std::size_t m = channels.size();
  std::vector<std::vector<double>> vals(m, std::vector<double>(grid.size()));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t g = 0; g < grid.size(); ++g) vals[j][g] = channels[j].value(grid[g]);
  }

  std::vector<double> breaks;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      auto diff = [&](double t) { return channels[i].value(t) - channels[j].value(t); };
      for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
        const double da = vals[i][g] - vals[j][g];
        const double db = vals[i][g + 1] - vals[j][g + 1];
        if ((da < 0 && db > 0) || (da > 0 && db < 0)) {
          breaks.push_back(bisect(diff, grid[g], grid[g + 1]));
        }
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  std::vector<double> edges{0.0};
  edges.insert(edges.end(), breaks.begin(), breaks.end());
  edges.push_back(kInf);

  EnvelopeIntegrals out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    // No crossings past the last break, so any point of the tail interval picks its top channel.
    const double probe = std::isinf(b) ? a + 0.5 / rmin : 0.5 * (a + b);
    std::size_t top = 0;
    double best = -kInf;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = channels[j].value(probe);
      if (v > best) {
        best = v;
        top = j;
      }
    }
    for (const auto& term : channels[top].terms()) {
      out.mass += exp_mass(term, a, b);
      out.first_moment += exp_first(term, a, b);
    }
  }
  return out;
}

EnvelopeIntegrals sampled_envelope(std::span<const KernelChannel> channels) {
  double h = kInf, t_end = 0.0;
  for (const auto& ch : channels) {
    if (ch.is_exponential()) {
      h = std::min(h, 1e-2 / ch.max_rate());
      t_end = std::max(t_end, kDecayHorizon / ch.min_rate());
    } else {
      require_decayed(ch);
      h = std::min(h, ch.step());
      t_end = std::max(t_end, ch.table_end());
    }
  }
  const auto count = static_cast<std::size_t>(std::ceil(t_end / h - 1e-9)) + 1;
  std::vector<double> env(count), tenv(count);
  for (std::size_t g = 0; g < count; ++g) {
    const double t = static_cast<double>(g) * h;
    double v = 0.0;
    for (const auto& ch : channels) v = std::max(v, ch.value_or_zero(t));
    env[g] = v;
    tenv[g] = t * v;
  }
  return {trapezoid(env, h), trapezoid(tenv, h)};
}

}  // namespace

// --- KernelChannel -----------------------------------------------------------

KernelChannel KernelChannel::exponential(std::vector<ExpTerm> terms) {
  if (terms.empty()) throw std::invalid_argument("kernel: exponential channel needs at least one term");
  for (const auto& term : terms) {
    if (!(term.weight > 0.0) || !std::isfinite(term.weight)) {
      throw std::invalid_argument("kernel: exponential weight must be finite and > 0");
    }
    if (!(term.rate > 0.0) || !std::isfinite(term.rate)) {
      throw std::invalid_argument("kernel: exponential rate must be finite and > 0");
    }
  }
  return KernelChannel(ExpSum{std::move(terms)});
}

KernelChannel KernelChannel::tabulated(double step, std::vector<double> samples) {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("kernel: table step must be finite and > 0");
  if (samples.size() < 2) throw std::invalid_argument("kernel: table needs at least two samples");
  double peak = 0.0;
  for (double s : samples) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("kernel: table samples must be finite and >= 0");
    peak = std::max(peak, s);
  }
  if (peak <= 0.0) throw std::invalid_argument("kernel: table is identically zero");
  return KernelChannel(Table{step, std::move(samples)});
}

double KernelChannel::value(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("kernel: evaluation time must be >= 0");
  if (const auto* e = std::get_if<ExpSum>(&form_)) {
    double v = 0.0;
    for (const auto& term : e->terms) v += term.weight * term.rate * std::exp(-term.rate * t);
    return v;
  }
  const auto& tab = std::get<Table>(form_);
  const double end = table_end();
  if (t > end * (1.0 + 1e-12)) {
    throw std::out_of_range("kernel: time " + std::to_string(t) + " is past the table end " + std::to_string(end));
  }
  const double x = std::min(t / tab.step, static_cast<double>(tab.samples.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(x), tab.samples.size() - 2);
  const double frac = x - static_cast<double>(i);
  return tab.samples[i] * (1.0 - frac) + tab.samples[i + 1] * frac;
}

double KernelChannel::value_or_zero(double t) const {
  if (!is_exponential() && t > table_end()) {
    require_decayed(*this);
    return 0.0;
  }
  return value(t);
}

double KernelChannel::total() const {
  if (const auto* e = std::get_if<ExpSum>(&form_)) {
    double s = 0.0;
    for (const auto& term : e->terms) s += term.weight;
    return s;
  }
  const auto& tab = std::get<Table>(form_);
  return trapezoid(tab.samples, tab.step);
}

double KernelChannel::first_moment() const {
  if (const auto* e = std::get_if<ExpSum>(&form_)) {
    double s = 0.0;
    for (const auto& term : e->terms) s += term.weight / term.rate;
    return s;
  }
  const auto& tab = std::get<Table>(form_);
  std::vector<double> ty(tab.samples.size());
  for (std::size_t i = 0; i < ty.size(); ++i) ty[i] = static_cast<double>(i) * tab.step * tab.samples[i];
  return trapezoid(ty, tab.step);
}

std::span<const ExpTerm> KernelChannel::terms() const {
  if (const auto* e = std::get_if<ExpSum>(&form_)) return e->terms;
  return {};
}

double KernelChannel::step() const {
  if (const auto* t = std::get_if<Table>(&form_)) return t->step;
  return 0.0;
}

std::span<const double> KernelChannel::samples() const {
  if (const auto* t = std::get_if<Table>(&form_)) return t->samples;
  return {};
}

double KernelChannel::table_end() const {
  if (const auto* t = std::get_if<Table>(&form_)) return t->step * static_cast<double>(t->samples.size() - 1);
  return kInf;
}

bool KernelChannel::tail_decayed() const {
  const auto* t = std::get_if<Table>(&form_);
  if (t == nullptr) return true;
  const double peak = *std::max_element(t->samples.begin(), t->samples.end());
  return t->samples.back() <= kTailTolerance * peak;
}

double KernelChannel::min_rate() const {
  double r = kInf;
  for (const auto& term : terms()) r = std::min(r, term.rate);
  return r;
}

double KernelChannel::max_rate() const {
  double r = 0.0;
  for (const auto& term : terms()) r = std::max(r, term.rate);
  return r;
}

// --- MemoryKernel --------------------------------------------------------------

MemoryKernel::MemoryKernel(std::vector<KernelChannel> channels) : channels_(std::move(channels)) {
  if (channels_.empty()) throw std::invalid_argument("kernel: memory kernel needs at least one channel");
}

MemoryKernel MemoryKernel::single_exponential(double weight, double rate) {
  return MemoryKernel({KernelChannel::exponential({{weight, rate}})});
}

bool MemoryKernel::is_exponential() const {
  return std::all_of(channels_.begin(), channels_.end(), [](const auto& c) { return c.is_exponential(); });
}

RealMatrix MemoryKernel::eval(double t) const {
  RealMatrix g = RealMatrix::Zero(size(), size());
  for (int j = 0; j < size(); ++j) g(j, j) = channels_[static_cast<std::size_t>(j)].value(t);
  return g;
}

RealVector MemoryKernel::totals() const {
  RealVector v(size());
  for (int j = 0; j < size(); ++j) v(j) = channels_[static_cast<std::size_t>(j)].total();
  return v;
}

MemoryKernel MemoryKernel::padded(int target_m) const {
  if (target_m < size()) {
    throw std::invalid_argument("kernel: cannot pad " + std::to_string(size()) + " channels down to " +
                                std::to_string(target_m));
  }
  auto chans = channels_;
  while (static_cast<int>(chans.size()) < target_m) chans.push_back(KernelChannel::exponential({{1.0, 1.0}}));
  return MemoryKernel(std::move(chans));
}

MemoryKernel MemoryKernel::leading(int count) const {
  if (count < 1 || count > size()) throw std::invalid_argument("kernel: leading channel count out of range");
  return MemoryKernel(std::vector<KernelChannel>(channels_.begin(), channels_.begin() + count));
}

// --- moments -------------------------------------------------------------------

EnvelopeIntegrals envelope_integrals(std::span<const KernelChannel> channels) {
  if (channels.empty()) throw std::invalid_argument("kernel: envelope of an empty channel set");
  if (channels.size() == 1) {
    require_decayed(channels[0]);
    return {channels[0].total(), channels[0].first_moment()};
  }
  const bool exponential =
      std::all_of(channels.begin(), channels.end(), [](const auto& c) { return c.is_exponential(); });
  return exponential ? exponential_envelope(channels) : sampled_envelope(channels);
}

KernelMoments moments(const MemoryKernel& kernel, int top_n) {
  if (top_n < 1 || top_n > kernel.size()) {
    throw std::invalid_argument("kernel: moments block size " + std::to_string(top_n) + " outside [1, " +
                                std::to_string(kernel.size()) + "]");
  }
  KernelMoments m;
  m.total = RealMatrix::Zero(top_n, top_n);
  for (int j = 0; j < top_n; ++j) m.total(j, j) = kernel.channel(j).total();
  const auto env = envelope_integrals(kernel.channels().first(static_cast<std::size_t>(top_n)));
  m.norm_mass = env.mass;
  m.mean_delay = env.first_moment / env.mass;
  return m;
}

RealMatrix inverse_sqrt_total(const MemoryKernel& kernel) {
  const RealVector tot = kernel.totals();
  RealMatrix out = RealMatrix::Zero(kernel.size(), kernel.size());
  for (int j = 0; j < kernel.size(); ++j) {
    if (!(tot(j) >= 1e-12)) {
      throw std::invalid_argument("kernel: channel " + std::to_string(j) + " has vanishing total integral");
    }
    out(j, j) = 1.0 / std::sqrt(tot(j));
  }
  return out;
}

bool kernel_dominates(const MemoryKernel& k, const MemoryKernel& k_ref, int top_n) {
  if (top_n < 1 || k.size() < top_n || k_ref.size() < top_n) {
    throw std::invalid_argument("kernel_dominates: both kernels need at least top_n channels");
  }
  const auto mk = moments(k, top_n);
  const auto mr = moments(k_ref, top_n);
  if ((mk.total - mr.total).cwiseAbs().maxCoeff() > 1e-10) return false;
  return mk.mean_delay <= mr.mean_delay * (1.0 + 1e-12);
}

}  // namespace qsync
