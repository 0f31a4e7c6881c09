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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "json_lines.hpp"
#include "qsync/cli.hpp"

namespace qsync::cli {

using nlohmann::json;

ConfigError::ConfigError(const std::string& source, int line, const std::string& pointer, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + (pointer.empty() ? "/" : pointer) + ": " +
                         message),
      line_(line),
      pointer_(pointer) {}

namespace {

class ConfigReader {
 public:
  ConfigReader(std::string_view text, std::string source) : locator_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& message) const {
    throw ConfigError(source_, locator_.line_of(ptr), ptr, message);
  }

  void object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed,
              std::initializer_list<const char*> required = {}) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
      if (!ok.count(key)) {
        std::string list;
        for (const auto& k : ok) list += (list.empty() ? "" : ", ") + k;
        fail(pointer_append(ptr, key), "unknown key \"" + key + "\" (allowed: " + list + ")");
      }
    }
    for (const char* key : required) {
      if (!j.contains(key)) fail(ptr, std::string("missing required key \"") + key + "\"");
    }
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ptr, "expected a finite number");
    return v;
  }

  double positive(const json& j, const std::string& ptr) const {
    const double v = number(j, ptr);
    if (!(v > 0.0)) fail(ptr, "expected a positive number");
    return v;
  }

  const json& array(const json& j, const std::string& ptr, bool allow_empty = false) const {
    if (!j.is_array()) fail(ptr, "expected an array");
    if (!allow_empty && j.empty()) fail(ptr, "expected a non-empty array");
    return j;
  }

  Complex complex(const json& j, const std::string& ptr) const {
    if (!j.is_array() || j.size() != 2) fail(ptr, "expected a complex number as [re, im]");
    return {number(j[0], pointer_append(ptr, "0")), number(j[1], pointer_append(ptr, "1"))};
  }

  std::vector<Complex> complex_vector(const json& j, const std::string& ptr) const {
    array(j, ptr);
    std::vector<Complex> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(complex(j[i], pointer_append(ptr, std::to_string(i))));
    return out;
  }

  RealMatrix real_matrix(const json& j, const std::string& ptr) const {
    array(j, ptr);
    const auto rows = j.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto rp = pointer_append(ptr, std::to_string(r));
      array(j[r], rp);
      if (r == 0) cols = j[r].size();
      if (j[r].size() != cols) fail(rp, "rows must have equal length");
    }
    RealMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            number(j[r][c], pointer_append(pointer_append(ptr, std::to_string(r)), std::to_string(c)));
      }
    }
    return m;
  }

  ComplexMatrix complex_matrix(const json& j, const std::string& ptr) const {
    array(j, ptr);
    const auto rows = j.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto rp = pointer_append(ptr, std::to_string(r));
      array(j[r], rp);
      if (r == 0) cols = j[r].size();
      if (j[r].size() != cols) fail(rp, "rows must have equal length");
    }
    ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            complex(j[r][c], pointer_append(pointer_append(ptr, std::to_string(r)), std::to_string(c)));
      }
    }
    return m;
  }

  RealMatrix square(const json& j, const std::string& ptr, Eigen::Index dim) const {
    RealMatrix m = real_matrix(j, ptr);
    if (m.rows() != dim || m.cols() != dim) {
      fail(ptr, "expected a " + std::to_string(dim) + " x " + std::to_string(dim) + " matrix, got " +
                    std::to_string(m.rows()) + " x " + std::to_string(m.cols()));
    }
    return m;
  }

  KernelChannel channel(const json& j, const std::string& ptr) const {
    if (!j.is_object() || !j.contains("form")) fail(ptr, "expected a channel object with a \"form\"");
    const auto& form = j["form"];
    if (!form.is_string()) fail(pointer_append(ptr, "form"), "expected \"exp\" or \"tabulated\"");
    if (form == "exp") {
      object(j, ptr, {"form", "terms"}, {"terms"});
      const auto tp = pointer_append(ptr, "terms");
      array(j["terms"], tp);
      std::vector<ExpTerm> terms;
      for (std::size_t k = 0; k < j["terms"].size(); ++k) {
        const auto kp = pointer_append(tp, std::to_string(k));
        const auto& t = j["terms"][k];
        object(t, kp, {"c", "beta"}, {"c", "beta"});
        terms.push_back({positive(t["c"], pointer_append(kp, "c")), positive(t["beta"], pointer_append(kp, "beta"))});
      }
      return KernelChannel::exponential(std::move(terms));
    }
    if (form == "tabulated") {
      object(j, ptr, {"form", "dt", "values"}, {"dt", "values"});
      const double dt = positive(j["dt"], pointer_append(ptr, "dt"));
      const auto vp = pointer_append(ptr, "values");
      array(j["values"], vp);
      std::vector<double> values;
      for (std::size_t k = 0; k < j["values"].size(); ++k) {
        const double v = number(j["values"][k], pointer_append(vp, std::to_string(k)));
        if (v < 0.0) fail(pointer_append(vp, std::to_string(k)), "kernel samples must be >= 0");
        values.push_back(v);
      }
      if (values.size() < 2) fail(vp, "a table needs at least two samples");
      auto ch = KernelChannel::tabulated(dt, std::move(values));
      if (!ch.tail_decayed()) fail(vp, "the last sample must be <= 1e-8 of the peak (the kernel must have decayed)");
      return ch;
    }
    fail(pointer_append(ptr, "form"), "expected \"exp\" or \"tabulated\"");
  }

  MemoryKernel kernel(const json& j, const std::string& ptr) const {
    object(j, ptr, {"channels"}, {"channels"});
    const auto cp = pointer_append(ptr, "channels");
    array(j["channels"], cp);
    std::vector<KernelChannel> ch;
    for (std::size_t k = 0; k < j["channels"].size(); ++k) {
      ch.push_back(channel(j["channels"][k], pointer_append(cp, std::to_string(k))));
    }
    return MemoryKernel(std::move(ch));
  }

  SubsystemParams subsystem(const json& j, const std::string& ptr) const {
    object(j, ptr, {"omega", "v", "kernel"}, {"omega", "v", "kernel"});
    const auto op = pointer_append(ptr, "omega");
    const RealMatrix omega = real_matrix(j["omega"], op);
    if (omega.rows() != omega.cols() || omega.rows() % 2 != 0) fail(op, "omega must be 2n x 2n");
    const auto vp = pointer_append(ptr, "v");
    const ComplexMatrix v = complex_matrix(j["v"], vp);
    if (v.cols() != omega.cols()) {
      fail(vp, "v must have " + std::to_string(omega.cols()) + " columns (2n), got " + std::to_string(v.cols()));
    }
    const auto kp = pointer_append(ptr, "kernel");
    MemoryKernel k = kernel(j["kernel"], kp);
    if (k.size() != v.rows()) {
      fail(kp, "kernel has " + std::to_string(k.size()) + " channels but v has " + std::to_string(v.rows()) + " rows");
    }
    if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > SubsystemParams::kSymmetrizeTolerance) {
      fail(op, "omega must be symmetric");
    }
    return SubsystemParams(omega, v, std::move(k));
  }

 private:
  JsonLocator locator_;
  std::string source_;
};

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(source, line, "", "invalid JSON: " + msg);
  }

  const ConfigReader rd(text, source);
  rd.object(root, "", {"subsystems", "engineered", "gain", "integrator", "scenarios", "output"}, {"subsystems"});

  RunConfig cfg;
  const auto& subs = root["subsystems"];
  rd.array(subs, "/subsystems");
  if (subs.size() != 2) rd.fail("/subsystems", "expected exactly two subsystems");
  for (std::size_t i = 0; i < 2; ++i) cfg.subsystems.push_back(rd.subsystem(subs[i], "/subsystems/" + std::to_string(i)));
  const int n = cfg.subsystems[0].n_modes();
  if (cfg.subsystems[1].n_modes() != n) {
    rd.fail("/subsystems/1/omega", "both subsystems must have the same number of modes (" + std::to_string(n) + ")");
  }

  if (root.contains("engineered")) {
    const auto& e = root["engineered"];
    rd.object(e, "/engineered", {"omega12", "v12", "v21"}, {"omega12", "v12", "v21"});
    EngineeredBlocks b;
    b.omega12 = rd.square(e["omega12"], "/engineered/omega12", 2 * n);
    b.v12 = rd.complex_matrix(e["v12"], "/engineered/v12");
    b.v21 = rd.complex_matrix(e["v21"], "/engineered/v21");
    for (const auto& [name, m] : {std::pair<const char*, const ComplexMatrix*>{"v12", &b.v12}, {"v21", &b.v21}}) {
      if (m->cols() != 2 * n) rd.fail(std::string("/engineered/") + name, "expected " + std::to_string(2 * n) + " columns");
    }
    if (b.v12.rows() != b.v21.rows()) rd.fail("/engineered/v21", "v12 and v21 must have the same number of rows");
    const int m = std::max(cfg.subsystems[0].n_fields(), cfg.subsystems[1].n_fields());
    if (b.v12.rows() > std::max(m, n)) {
      rd.fail("/engineered/v12", "has " + std::to_string(b.v12.rows()) + " rows but the subsystems have " +
                                     std::to_string(m) + " fields");
    }
    cfg.engineered = std::move(b);
  }

  if (root.contains("gain")) cfg.gain = rd.positive(root["gain"], "/gain");

  if (root.contains("integrator")) {
    const auto& it = root["integrator"];
    rd.object(it, "/integrator", {"method", "dt", "horizon", "kernel_cutoff"});
    if (it.contains("method")) {
      const auto& m = it["method"];
      if (m == "cq" || m == "convolution-quadrature") cfg.method = IntegratorMethod::kConvolutionQuadrature;
      else if (m == "lift" || m == "exponential-lift") cfg.method = IntegratorMethod::kExponentialLift;
      else rd.fail("/integrator/method", "expected \"cq\" or \"lift\"");
    }
    if (it.contains("dt")) cfg.dt = rd.positive(it["dt"], "/integrator/dt");
    if (it.contains("horizon")) cfg.horizon = rd.positive(it["horizon"], "/integrator/horizon");
    if (it.contains("kernel_cutoff")) {
      cfg.kernel_cutoff = rd.number(it["kernel_cutoff"], "/integrator/kernel_cutoff");
      if (*cfg.kernel_cutoff < 0.0) rd.fail("/integrator/kernel_cutoff", "expected a number >= 0");
    }
    if (cfg.dt && cfg.horizon && *cfg.dt > *cfg.horizon) rd.fail("/integrator/dt", "dt must not exceed the horizon");
  }

  if (root.contains("scenarios")) {
    const auto& sc = root["scenarios"];
    rd.array(sc, "/scenarios", true);
    std::set<std::string> names;
    for (std::size_t i = 0; i < sc.size(); ++i) {
      const auto p = "/scenarios/" + std::to_string(i);
      rd.object(sc[i], p, {"name", "alphas1", "alphas2"}, {"name", "alphas1", "alphas2"});
      Scenario s;
      if (!sc[i]["name"].is_string()) rd.fail(p + "/name", "expected a string");
      s.name = sc[i]["name"].get<std::string>();
      if (s.name.empty() || s.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.") !=
                                std::string::npos || s.name.front() == '.') {
        rd.fail(p + "/name", "names may only use letters, digits, '_', '-' and '.'");
      }
      if (!names.insert(s.name).second) rd.fail(p + "/name", "duplicate scenario name \"" + s.name + "\"");
      s.alphas1 = rd.complex_vector(sc[i]["alphas1"], p + "/alphas1");
      s.alphas2 = rd.complex_vector(sc[i]["alphas2"], p + "/alphas2");
      for (const char* key : {"alphas1", "alphas2"}) {
        const auto& v = std::string(key) == "alphas1" ? s.alphas1 : s.alphas2;
        if (static_cast<int>(v.size()) != n) {
          rd.fail(p + "/" + key, "expected one amplitude per mode (" + std::to_string(n) + ")");
        }
      }
      cfg.scenarios.push_back(std::move(s));
    }
  }

  if (root.contains("output")) {
    if (!root["output"].is_string()) rd.fail("/output", "expected a directory path");
    cfg.output = root["output"].get<std::string>();
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "", "cannot open the configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string example_config_text() {
  return R"({
  "subsystems": [
    {
      "omega": [[0.0, 0.1], [0.1, 0.0]],
      "v": [[[0.2, 0.0], [0.0, -0.1]]],
      "kernel": {"channels": [{"form": "exp", "terms": [{"c": 1.0, "beta": 9.0}]}]}
    },
    {
      "omega": [[0.0, 0.1], [0.1, 0.0]],
      "v": [[[0.2, 0.0], [0.0, -0.1]]],
      "kernel": {"channels": [{"form": "exp", "terms": [{"c": 1.0, "beta": 9.0}]}]}
    }
  ],
  "gain": 0.4,
  "integrator": {"method": "lift", "dt": 0.001, "horizon": 20.0},
  "scenarios": [
    {"name": "scenario1", "alphas1": [[1.0, 0.0]], "alphas2": [[0.0, 0.0]]},
    {"name": "scenario2", "alphas1": [[0.0, 0.0]], "alphas2": [[0.0, 1.0]]},
    {"name": "scenario3", "alphas1": [[1.0, 0.0]], "alphas2": [[0.0, 1.0]]}
  ]
}
)";
}

}  // namespace qsync::cli
