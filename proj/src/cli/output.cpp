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

#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include <fmt/format.h>

namespace qsync::cli {

using nlohmann::json;

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
  return std::stod(fmt::format("{:.12g}", v));
}

json to_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

json to_json(Complex z) { return json::array({to_json(z.real()), to_json(z.imag())}); }

namespace {

template <typename Matrix, typename Convert>
json matrix_json(const Matrix& m, Convert convert) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(convert(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

json exact(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json exact(Complex z) { return json::array({exact(z.real()), exact(z.imag())}); }

}  // namespace

json to_json(const RealMatrix& m) { return matrix_json(m, [](double v) { return to_json(v); }); }
json to_json(const ComplexMatrix& m) { return matrix_json(m, [](Complex z) { return to_json(z); }); }
json to_json_exact(const RealMatrix& m) { return matrix_json(m, [](double v) { return exact(v); }); }
json to_json_exact(const ComplexMatrix& m) { return matrix_json(m, [](Complex z) { return exact(z); }); }

json conditions_json(const ConditionReport& r) {
  return {
      {"tolerance", kConditionTolerance},
      {"hamiltonian_balance", {{"holds", r.balance_holds}, {"residual", to_json(r.balance_residual)}}},
      {"kernel_balance", {{"holds", r.kernel_balance_holds}, {"residual", to_json(r.kernel_balance_residual)}}},
      {"hamiltonian_symmetry", {{"holds", r.symmetry_holds}, {"residual", to_json(r.symmetry_residual)}}},
      {"sufficient", r.sufficient},
      {"necessary_violated", r.necessary_violated},
  };
}

json error_dynamics_json(const ErrorDynamics& e) {
  return {
      {"e", to_json(e.e_mat)},
      {"f_total", to_json(e.f_total)},
      {"f_norm_mass", to_json(e.f_norm_mass)},
      {"f_mean_delay", to_json(e.f_mean_delay)},
      {"closed_form_moments", e.closed_form_moments},
  };
}

json certificate_json(const StabilityCertificate& c) {
  return {
      {"passes", c.passes},
      {"cause", to_string(c.cause)},
      {"hurwitz", c.hurwitz},
      {"lambda1", to_json(c.lambda1)},
      {"threshold", to_json(c.threshold)},
      {"mean_delay", to_json(c.mean_delay)},
      {"e_norm", to_json(c.e_norm)},
      {"f_norm_mass", to_json(c.f_norm_mass)},
      {"dimension", c.dimension},
  };
}

json synthesis_json(const SynthesisResult& s) {
  return {
      {"status", "ok"},
      {"gain_a", exact(s.gain_a)},
      {"k", to_json_exact(s.k_mat)},
      {"engineered",
       {{"omega12", to_json_exact(s.omega12)}, {"v12", to_json_exact(s.v12)}, {"v21", to_json_exact(s.v21)}}},
  };
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  write_csv(traj, os);
  return os.str();
}

std::string error_norms_csv(const std::vector<const Trajectory*>& errors, const std::vector<std::string>& headers) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "t");
  for (const auto& h : headers) fmt::format_to(std::back_inserter(buf), ",{}", h);
  buf.push_back('\n');
  std::size_t rows = errors.empty() ? 0 : errors.front()->times.size();
  for (const auto* e : errors) rows = std::min(rows, e->times.size());
  for (std::size_t k = 0; k < rows; ++k) {
    fmt::format_to(std::back_inserter(buf), "{:.12g}", errors.front()->times[k]);
    for (const auto* e : errors) fmt::format_to(std::back_inserter(buf), ",{:.12g}", e->norms[k]);
    buf.push_back('\n');
  }
  return fmt::to_string(buf);
}

}  // namespace qsync::cli
