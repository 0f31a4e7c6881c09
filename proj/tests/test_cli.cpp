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
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "json_lines.hpp"
#include "qsync/cli.hpp"

using namespace qsync;
using namespace qsync::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qsync_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const json& cfg) {
  const auto path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

json example() { return json::parse(example_config_text()); }

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cmd(const std::string& command, const fs::path& dir, const std::optional<fs::path>& config,
               Options extra = {}) {
  extra.command = command;
  extra.config = config;
  extra.out = dir;
  std::ostringstream out, err;
  const int code = run(extra, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("json locator") {
  const std::string text = "{\n  \"a\": 1,\n  \"b\": [\n    2,\n    {\"c\": 3}\n  ]\n}\n";
  const JsonLocator loc(text);
  CHECK(loc.line_of("/a") == 2);
  CHECK(loc.line_of("/b") == 3);
  CHECK(loc.line_of("/b/0") == 4);
  CHECK(loc.line_of("/b/1") == 5);
  CHECK(loc.line_of("/b/1/c") == 5);
  CHECK(loc.line_of("/b/1/missing") == 5);
  CHECK(loc.line_of("/nothing") == 1);

  const JsonLocator siblings("[\n  {\"k\": 1},\n  {\n    \"k\": 2\n  }\n]");
  CHECK(siblings.line_of("/0/k") == 2);
  CHECK(siblings.line_of("/1") == 3);
  CHECK(siblings.line_of("/1/k") == 4);
  CHECK(pointer_append("/x", "a/b~c") == "/x/a~1b~0c");
}

TEST_CASE("config errors are line anchored") {
  CHECK_NOTHROW(parse_config(example_config_text()));

  std::string text = example_config_text();
  text.replace(text.find("\"gain\""), 6, "\"gian\"");
  try {
    parse_config(text, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 14);
    CHECK(std::string(e.what()).find("cfg.json:14: /gian: unknown key") == 0);
  }

  text = example_config_text();
  text.replace(text.find("\"beta\": 9.0"), 11, "\"beta\": -9.0");
  try {
    parse_config(text, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.pointer() == "/subsystems/0/kernel/channels/0/terms/0/beta");
    CHECK(e.line() == 6);
  }

  try {
    parse_config("{\n  \"subsystems\": [\n  }\n", "bad.json");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("invalid JSON") != std::string::npos);
  }

  json cfg = example();
  cfg["subsystems"][0]["omega"] = json::array({json::array({0.0, 0.1}), json::array({0.2, 0.0})});
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["subsystems"][0]["v"] = json::array({json::array({json::array({0.2, 0.0})})});
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["scenarios"][0]["alphas1"] = json::array({json::array({1.0, 0.0}), json::array({1.0, 0.0})});
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["scenarios"][1]["name"] = "scenario1";
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["scenarios"][1]["name"] = "../escape";
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["subsystems"].erase(1);
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
  cfg = example();
  cfg["integrator"]["method"] = "rk45";
  CHECK_THROWS_AS(parse_config(cfg.dump(2)), ConfigError);
}

TEST_CASE("config exit codes") {
  const auto dir = fresh_dir("codes");
  auto r = run_cmd("check", dir, dir / "missing.json");
  CHECK(r.code == kExitConfigError);
  r = run_cmd("check", dir, std::nullopt);
  CHECK(r.code == kExitConfigError);
  json cfg = example();
  cfg["extra"] = 1;
  r = run_cmd("check", dir, write_config(dir, cfg));
  CHECK(r.code == kExitConfigError);
  CHECK(r.err.find(":2: /extra: unknown key") != std::string::npos);  // "extra" sorts first in the dump

  cfg = example();
  cfg["gain"] = 0.05;  // below ||J Omega1|| = 0.1
  r = run_cmd("check", dir, write_config(dir, cfg));
  CHECK(r.code == kExitConfigError);
  CHECK(r.err.find("must exceed") != std::string::npos);
}

TEST_CASE("check of the example") {
  const auto dir = fresh_dir("check");
  const auto r = run_cmd("check", dir, write_config(dir, example()));
  CHECK(r.code == kExitOk);
  const auto rep = read_json(dir / "report.json");
  CHECK(rep["status"] == "passes");
  CHECK(rep["conditions"]["sufficient"] == true);
  CHECK(rep["certificate"]["threshold"].get<double>() == doctest::Approx(0.1125).epsilon(1e-11));
  CHECK(rep["certificate"]["mean_delay"].get<double>() == doctest::Approx(1.0 / 9.0).epsilon(1e-11));
  CHECK(rep["certificate"]["lambda1"][0].get<double>() == doctest::Approx(-0.6));
}

TEST_CASE("check flags an asymmetric engineered hamiltonian") {
  const auto dir = fresh_dir("asym");
  json cfg = example();
  cfg["engineered"] = {{"omega12", {{0.0, 1.0}, {0.0, 0.0}}},
                       {"v12", {{{0.0, 0.0}, {0.0, 0.0}}}},
                       {"v21", {{{0.0, 0.0}, {0.0, 0.0}}}}};
  const auto r = run_cmd("check", dir, write_config(dir, cfg));
  CHECK(r.code == kExitCheckFailed);
  const auto rep = read_json(dir / "report.json");
  CHECK(rep["conditions"]["hamiltonian_symmetry"]["holds"] == false);
  CHECK(rep["conditions"]["necessary_violated"] == true);
  CHECK(rep["certificate"].is_null());
}

TEST_CASE("check fails the certificate for a slow kernel") {
  const auto dir = fresh_dir("slow");
  json cfg = example();
  for (auto& s : cfg["subsystems"]) s["kernel"]["channels"][0]["terms"][0]["beta"] = 1.0;
  const auto r = run_cmd("check", dir, write_config(dir, cfg));
  CHECK(r.code == kExitCheckFailed);
  const auto rep = read_json(dir / "report.json");
  CHECK(rep["certificate"]["passes"] == false);
  CHECK(rep["certificate"]["mean_delay"].get<double>() == doctest::Approx(1.0));
  CHECK(rep["certificate"]["cause"] == "mean_delay_not_below_threshold");
}

TEST_CASE("synthesize") {
  const auto dir = fresh_dir("synth");
  json cfg = example();
  auto r = run_cmd("synthesize", dir, write_config(dir, cfg));
  CHECK(r.code == kExitOk);
  auto syn = read_json(dir / "synthesis.json");
  CHECK(syn["status"] == "ok");
  CHECK(syn["gain_a"].get<double>() == doctest::Approx(0.4));
  const double s = std::sqrt(0.4);
  CHECK(syn["engineered"]["v12"][0][0][0].get<double>() == doctest::Approx(0.2 - s).epsilon(1e-11));
  CHECK(syn["engineered"]["v12"][0][1][1].get<double>() == doctest::Approx(-0.1 - s).epsilon(1e-11));

  cfg.erase("gain");
  r = run_cmd("synthesize", dir, write_config(dir, cfg));
  CHECK(r.code == kExitOk);
  syn = read_json(dir / "synthesis.json");
  CHECK(syn["gain_source"] == "search");
  CHECK(syn["gain_threshold"].get<double>() > syn["mean_delay"].get<double>());

  Options flag;
  flag.gain = 0.45;
  r = run_cmd("synthesize", dir, write_config(dir, cfg), flag);
  CHECK(read_json(dir / "synthesis.json")["gain_a"].get<double>() == doctest::Approx(0.45));
}

TEST_CASE("synthesize rejects heterogeneous subsystems") {
  const auto dir = fresh_dir("hetero");
  json cfg = example();
  cfg["subsystems"][1]["omega"] = {{0.0, 0.2}, {0.2, 0.0}};
  const auto r = run_cmd("synthesize", dir, write_config(dir, cfg));
  CHECK(r.code == kExitCheckFailed);
  CHECK(r.err.find("Omega1 must equal Omega2") != std::string::npos);
  const auto syn = read_json(dir / "synthesis.json");
  CHECK(syn["status"] == "rejected");
  CHECK(syn["reason"].get<std::string>().find("Omega1 must equal Omega2") == 0);
}

TEST_CASE("synthesize reports a missing gain as a structured failure") {
  const auto dir = fresh_dir("nogain");
  json cfg = example();
  cfg.erase("gain");
  for (auto& s : cfg["subsystems"]) s["kernel"]["channels"][0]["terms"][0]["beta"] = 2.0;
  const auto r = run_cmd("synthesize", dir, write_config(dir, cfg));
  CHECK(r.code == kExitCheckFailed);
  const auto syn = read_json(dir / "synthesis.json");
  CHECK(syn["status"] == "gain_not_found");
  CHECK(syn["mean_delay"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("fewer fields than modes are padded") {
  const auto dir = fresh_dir("pad");
  json sub = {{"omega", {{0.1, 0, 0, 0}, {0, 0.1, 0, 0}, {0, 0, 0.2, 0}, {0, 0, 0, 0.2}}},
              {"v", {{{0.1, 0}, {0, 0.1}, {0.2, 0}, {0, 0}}}},
              {"kernel", {{"channels", {{{"form", "exp"}, {"terms", {{{"c", 1.0}, {"beta", 50.0}}}}}}}}}};
  json cfg = {{"subsystems", {sub, sub}}, {"gain", 0.5}};
  const auto r = run_cmd("check", dir, write_config(dir, cfg));
  const auto rep = read_json(dir / "report.json");
  CHECK(rep["synthesis"]["padding"]["fields_used"] == 2);
  CHECK(rep["synthesis"]["k"].size() == 2);
  CHECK(rep["conditions"]["sufficient"] == true);
  CHECK(rep["certificate"]["hurwitz"] == true);
  CHECK(r.code == (rep["certificate"]["passes"] == true ? kExitOk : kExitCheckFailed));
}

TEST_CASE("synthesis output round trips as engineered blocks") {
  const auto dir = fresh_dir("roundtrip");
  json cfg = example();
  REQUIRE(run_cmd("check", dir, write_config(dir, cfg)).code == kExitOk);
  const auto first = read_json(dir / "report.json");
  REQUIRE(run_cmd("synthesize", dir, write_config(dir, cfg)).code == kExitOk);
  cfg["engineered"] = read_json(dir / "synthesis.json")["engineered"];
  REQUIRE(run_cmd("check", dir, write_config(dir, cfg)).code == kExitOk);
  const auto second = read_json(dir / "report.json");
  CHECK(second["engineered_source"] == "config");
  CHECK(first["conditions"] == second["conditions"]);
  CHECK(first["certificate"] == second["certificate"]);
  CHECK(first["error_dynamics"] == second["error_dynamics"]);
}

TEST_CASE("simulate") {
  const auto dir = fresh_dir("simulate");
  json cfg = example();
  cfg["scenarios"].push_back({{"name", "same"}, {"alphas1", {{0.5, -0.5}}}, {"alphas2", {{0.5, -0.5}}}});
  const auto path = write_config(dir, cfg);
  auto r = run_cmd("simulate", dir, path);
  REQUIRE(r.code == kExitOk);
  const auto lift = read_json(dir / "summary.json");
  CHECK(lift["method"] == "lift");
  for (const auto& s : lift["scenarios"]) {
    CHECK(s["status"] == "ok");
    CHECK(s["final_error_norm"].get<double>() <= 1e-3 * s["initial_error_norm"].get<double>() + 1e-12);
    CHECK(fs::exists(dir / ("traj_" + s["name"].get<std::string>() + ".csv")));
    CHECK(fs::exists(dir / ("err_" + s["name"].get<std::string>() + ".csv")));
  }
  CHECK(lift["scenarios"][3]["max_error_norm"].get<double>() <= 1e-9);
  CHECK(slurp(dir / "err_scenario1.csv").rfind("t,x1,x2,norm\n", 0) == 0);

  Options cq;
  cq.method = IntegratorMethod::kConvolutionQuadrature;
  r = run_cmd("simulate", dir, path, cq);
  REQUIRE(r.code == kExitOk);
  const auto quad = read_json(dir / "summary.json");
  CHECK(quad["method"] == "cq");
  for (std::size_t i = 0; i < 4; ++i) {
    for (const char* key : {"final_error_norm", "max_error_norm", "initial_error_norm"}) {
      CHECK(std::abs(quad["scenarios"][i][key].get<double>() - lift["scenarios"][i][key].get<double>()) <= 1e-4);
    }
  }
}

TEST_CASE("simulate reports divergence per scenario") {
  const auto dir = fresh_dir("diverge");
  json sub = {{"omega", {{1.0, 0.0}, {0.0, -1.0}}},
              {"v", {{{0.0, 0.0}, {0.0, 0.0}}}},
              {"kernel", {{"channels", {{{"form", "exp"}, {"terms", {{{"c", 1.0}, {"beta", 1.0}}}}}}}}}};
  json cfg = {{"subsystems", {sub, sub}},
              {"engineered", {{"omega12", {{0, 0}, {0, 0}}}, {"v12", {{{0, 0}, {0, 0}}}}, {"v21", {{{0, 0}, {0, 0}}}}}},
              {"scenarios",
               {{{"name", "quiet"}, {"alphas1", {{0, 0}}}, {"alphas2", {{0, 0}}}},
                {{"name", "loud"}, {"alphas1", {{1, 0}}}, {"alphas2", {{0, 0}}}}}}};
  const auto r = run_cmd("simulate", dir, write_config(dir, cfg));
  CHECK(r.code == kExitDiverged);
  const auto sum = read_json(dir / "summary.json");
  CHECK(sum["scenarios"][0]["status"] == "ok");
  CHECK(sum["scenarios"][1]["status"] == "diverged");
  CHECK(fs::exists(dir / "err_quiet.csv"));
  CHECK_FALSE(fs::exists(dir / "err_loud.csv"));
}

TEST_CASE("tabulated kernels need convolution quadrature") {
  const auto dir = fresh_dir("tab");
  json values = json::array();
  for (int k = 0; k <= 1000; ++k) values.push_back(k == 1000 ? 0.0 : 9.0 * std::exp(-9.0 * k * 0.005));
  json cfg = example();
  cfg.erase("integrator");
  for (auto& s : cfg["subsystems"]) s["kernel"] = {{"channels", {{{"form", "tabulated"}, {"dt", 0.005}, {"values", values}}}}};
  const auto path = write_config(dir, cfg);
  Options lift;
  lift.method = IntegratorMethod::kExponentialLift;
  CHECK(run_cmd("simulate", dir, path, lift).code == kExitConfigError);
  Options quick;
  quick.horizon = 5.0;
  quick.dt = 5e-3;
  CHECK(run_cmd("simulate", dir, path, quick).code == kExitOk);
  CHECK(read_json(dir / "summary.json")["method"] == "cq");
  const auto r = run_cmd("check", dir, path);
  const auto rep = read_json(dir / "report.json");
  CHECK(rep["certificate"]["mean_delay"].get<double>() == doctest::Approx(1.0 / 9.0).epsilon(1e-3));
  CHECK(rep["error_dynamics"]["closed_form_moments"] == false);
  (void)r;
}

TEST_CASE("reproduce-example") {
  const auto dir = fresh_dir("reproduce");
  auto r = run_cmd("reproduce-example", dir, std::nullopt);
  CHECK(r.code == kExitOk);
  for (const char* f : {"config.json", "report.json", "synthesis.json", "summary.json", "fig1_data.csv",
                        "traj_scenario1.csv", "err_scenario3.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto fig = slurp(dir / "fig1_data.csv");
  CHECK(fig.rfind("t,|e|_scenario1,|e|_scenario2,|e|_scenario3\n", 0) == 0);
  CHECK(fig.find("\n0,1.41421356237,1.41421356237,2\n") != std::string::npos);
  const auto sum = read_json(dir / "summary.json");
  for (const auto& s : sum["scenarios"]) {
    CHECK(s["final_error_norm"].get<double>() <= 1e-3 * s["initial_error_norm"].get<double>());
  }
  CHECK(parse_config(slurp(dir / "config.json")).scenarios.size() == 3);

  // Determinism: a second run produces byte-identical artifacts.
  const auto again = fresh_dir("reproduce_again");
  REQUIRE(run_cmd("reproduce-example", again, std::nullopt).code == kExitOk);
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(slurp(entry.path()) == slurp(again / entry.path().filename()));
  }
  // No temporaries left behind.
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(entry.path().filename().string().find(".tmp.") == std::string::npos);
  }
}
