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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qsync/kernel.hpp"
#include "support.hpp"

using namespace qsync;
using qsync::testing::Gen;
using qsync::testing::simpson;

namespace {

// Independent moments of max_j gamma_j(t) on a fine trapezoid grid.
struct Quad {
  double mass;
  double first;
};

Quad trapezoid_envelope(std::span<const KernelChannel> ch, double t_end, double h) {
  Quad q{0.0, 0.0};
  const auto env = [&](double t) {
    double m = 0.0;
    for (const auto& c : ch) m = std::max(m, c.value(t));
    return m;
  };
  const auto steps = static_cast<long>(std::ceil(t_end / h));
  double prev = env(0.0);
  for (long k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const double cur = env(t);
    q.mass += 0.5 * h * (prev + cur);
    q.first += 0.5 * h * ((t - h) * prev + t * cur);
    prev = cur;
  }
  return q;
}

}  // namespace

TEST_CASE("evaluation of exponential channels") {
  const auto k = MemoryKernel::single_exponential(1.0, 9.0);
  CHECK(k.eval(0.0)(0, 0) == doctest::Approx(9.0));
  CHECK(k.eval(50.0)(0, 0) < 1e-150);
  CHECK(k.eval(50.0)(0, 0) >= 0.0);

  const auto two = KernelChannel::exponential({{0.5, 1.0}, {0.5, 2.0}});
  CHECK(two.value(0.0) == doctest::Approx(1.5));
  CHECK(two.value(1.0) == doctest::Approx(0.5 * std::exp(-1.0) + std::exp(-2.0)));

  CHECK_THROWS_AS(k.eval(-1e-3), std::invalid_argument);
  CHECK_THROWS(KernelChannel::exponential({}));
  CHECK_THROWS(KernelChannel::exponential({{-1.0, 1.0}}));
  CHECK_THROWS(KernelChannel::exponential({{1.0, 0.0}}));
  CHECK_THROWS(MemoryKernel(std::vector<KernelChannel>{}));
}

TEST_CASE("tabulated channels") {
  std::vector<double> s;
  for (int k = 0; k <= 4000; ++k) s.push_back(2.0 * std::exp(-2.0 * k * 0.01));
  s.back() = 0.0;
  const auto ch = KernelChannel::tabulated(0.01, s);
  CHECK(ch.value(0.005) == doctest::Approx(0.5 * (s[0] + s[1])));
  CHECK(ch.value(40.0) == 0.0);
  CHECK_THROWS_AS(ch.value(40.5), std::out_of_range);
  CHECK(ch.value_or_zero(40.5) == 0.0);
  CHECK(ch.total() == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(ch.first_moment() == doctest::Approx(0.5).epsilon(1e-4));

  // Moments need a decayed tail.
  const auto slow = KernelChannel::tabulated(0.1, {1.0, 0.5, 0.25});
  CHECK_FALSE(slow.tail_decayed());
  CHECK_THROWS_AS(moments(MemoryKernel({slow}), 1), std::invalid_argument);
  CHECK_THROWS(KernelChannel::tabulated(0.1, {1.0, -0.5, 0.0}));
  CHECK_THROWS(KernelChannel::tabulated(0.0, {1.0, 0.0}));
}

TEST_CASE("moments of the example kernel") {
  const auto m = moments(MemoryKernel::single_exponential(1.0, 9.0), 1);
  CHECK(m.total(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.norm_mass == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(m.mean_delay - 1.0 / 9.0) <= 1e-12);
}

TEST_CASE("moments against a quadrature oracle") {
  const auto k = MemoryKernel::single_exponential(2.0, 4.0);
  const auto m = moments(k, 1);
  CHECK(m.total(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(m.mean_delay == doctest::Approx(0.25).epsilon(1e-14));
  const double mass = simpson([&](double t) { return k.channel(0).value(t); }, 0.0, 15.0, 20000);
  const double first = simpson([&](double t) { return t * k.channel(0).value(t); }, 0.0, 15.0, 20000);
  CHECK(m.norm_mass == doctest::Approx(mass).epsilon(1e-9));
  CHECK(m.mean_delay == doctest::Approx(first / mass).epsilon(1e-9));

  // Dirac limit.
  CHECK(moments(MemoryKernel::single_exponential(1.0, 1e6), 1).mean_delay < 1e-5);
}

TEST_CASE("envelope with crossing channels") {
  // gamma_1 = 4 e^{-4t}, gamma_2 = e^{-t} cross at t = ln 4 / 3.
  const MemoryKernel k({KernelChannel::exponential({{1.0, 4.0}}), KernelChannel::exponential({{1.0, 1.0}})});
  const double tc = std::log(4.0) / 3.0;
  const double mass = (1.0 - std::exp(-4.0 * tc)) + std::exp(-tc);
  const double first = (1.0 - std::exp(-4.0 * tc) * (1.0 + 4.0 * tc)) / 4.0 + std::exp(-tc) * (tc + 1.0);
  const auto m = moments(k, 2);
  CHECK(m.norm_mass == doctest::Approx(mass).epsilon(1e-12));
  CHECK(m.mean_delay == doctest::Approx(first / mass).epsilon(1e-12));
  CHECK(m.total(1, 1) == doctest::Approx(1.0));
  // Only the first channel counts for top_n = 1.
  CHECK(moments(k, 1).mean_delay == doctest::Approx(0.25));
  CHECK_THROWS(moments(k, 3));
}

TEST_CASE("property: closed-form moments match trapezoid quadrature") {
  Gen gen(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = gen.integer(1, 3);
    const auto k = gen.exp_kernel(m, 3);
    double bmin = 1e300;
    for (const auto& c : k.channels()) bmin = std::min(bmin, c.min_rate());
    const auto mom = moments(k, m);
    // Trapezoid error is about (h beta_max)^2 / 12, so resolve the fastest rate.
    double bmax = 0.0;
    for (const auto& c : k.channels()) bmax = std::max(bmax, c.max_rate());
    const auto q = trapezoid_envelope(k.channels(), 40.0 / bmin, std::min(bmin, 1.0 / bmax) / 1000.0);
    CHECK(mom.norm_mass == doctest::Approx(q.mass).epsilon(1e-6));
    CHECK(mom.mean_delay == doctest::Approx(q.first / q.mass).epsilon(1e-6));
  }
}

TEST_CASE("property: scaling the weights") {
  Gen gen(22);
  for (int trial = 0; trial < 50; ++trial) {
    auto base = gen.exp_channel(3);
    const double s = gen.uniform(0.1, 10.0);
    std::vector<ExpTerm> scaled(base.terms().begin(), base.terms().end());
    for (auto& t : scaled) t.weight *= s;
    const auto m0 = moments(MemoryKernel({base}), 1);
    const auto m1 = moments(MemoryKernel({KernelChannel::exponential(scaled)}), 1);
    CHECK(std::abs(m1.total(0, 0) - s * m0.total(0, 0)) <= 1e-12 * s * m0.total(0, 0));
    CHECK(std::abs(m1.norm_mass - s * m0.norm_mass) <= 1e-12 * s * m0.norm_mass);
    CHECK(std::abs(m1.mean_delay - m0.mean_delay) <= 1e-12 * m0.mean_delay);
  }
}

TEST_CASE("property: channels are non-negative") {
  Gen gen(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = gen.exp_kernel(gen.integer(1, 4));
    for (int i = 0; i < 100; ++i) {
      const RealMatrix g = k.eval(gen.uniform(0.0, 100.0));
      CHECK(g.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("inverse square root of totals") {
  CHECK(inverse_sqrt_total(MemoryKernel::single_exponential(1.0, 9.0))(0, 0) == doctest::Approx(1.0));
  CHECK(inverse_sqrt_total(MemoryKernel::single_exponential(4.0, 1.0))(0, 0) == doctest::Approx(0.5));
  const MemoryKernel two({KernelChannel::exponential({{1.0, 3.0}}), KernelChannel::exponential({{4.0, 2.0}})});
  const RealMatrix r = inverse_sqrt_total(two);
  CHECK(r(0, 0) == doctest::Approx(1.0));
  CHECK(r(1, 1) == doctest::Approx(0.5));
  CHECK(r(0, 1) == 0.0);
  CHECK_THROWS(inverse_sqrt_total(MemoryKernel::single_exponential(1e-13, 1.0)));
}

TEST_CASE("kernel dominance") {
  const auto ref = MemoryKernel::single_exponential(1.0, 9.0);
  CHECK(kernel_dominates(ref, ref, 1));
  CHECK(kernel_dominates(MemoryKernel::single_exponential(1.0, 18.0), ref, 1));
  CHECK_FALSE(kernel_dominates(MemoryKernel::single_exponential(1.0, 4.5), ref, 1));
  CHECK_FALSE(kernel_dominates(MemoryKernel::single_exponential(1.1, 18.0), ref, 1));

  // Oracle: delays from quadrature.
  const auto delay = [](double beta) {
    const auto f = [beta](double t) { return beta * std::exp(-beta * t); };
    const double mass = simpson(f, 0.0, 60.0 / beta, 40000);
    return simpson([&](double t) { return t * f(t); }, 0.0, 60.0 / beta, 40000) / mass;
  };
  CHECK(delay(18.0) <= delay(9.0));
  CHECK(delay(4.5) > delay(9.0));
}

TEST_CASE("padding and truncation") {
  const auto k = MemoryKernel::single_exponential(2.0, 3.0);
  const auto p = k.padded(3);
  CHECK(p.size() == 3);
  CHECK(p.totals()(2) == doctest::Approx(1.0));
  CHECK(p.leading(1).totals()(0) == doctest::Approx(2.0));
  CHECK_THROWS(p.padded(2));
}
