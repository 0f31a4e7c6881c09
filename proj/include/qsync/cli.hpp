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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsync/solver.hpp"
#include "qsync/sync.hpp"

namespace qsync::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfigError = 2,
  kExitDiverged = 3,
};

/// Malformed configuration. what() is "<source>:<line>: <pointer>: <message>".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& pointer, const std::string& message);
  int line() const { return line_; }
  const std::string& pointer() const { return pointer_; }

 private:
  int line_;
  std::string pointer_;
};

struct EngineeredBlocks {
  RealMatrix omega12;
  ComplexMatrix v12;
  ComplexMatrix v21;
};

/// Coherent amplitudes for both subsystems, one per mode.
struct Scenario {
  std::string name;
  std::vector<Complex> alphas1;
  std::vector<Complex> alphas2;
};

struct RunConfig {
  std::vector<SubsystemParams> subsystems;  ///< exactly two
  std::optional<EngineeredBlocks> engineered;
  std::optional<double> gain;
  std::optional<IntegratorMethod> method;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<double> kernel_cutoff;
  std::vector<Scenario> scenarios;
  std::optional<std::string> output;
};

/// Parses a JSON configuration. Unknown keys are rejected. Throws ConfigError.
RunConfig parse_config(std::string_view text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

/// The worked two-mode example: Omega = [[0, .1], [.1, 0]], V = (0.2, -0.1i),
/// gamma(t) = 9 exp(-9t), gain 0.4, three scenarios.
std::string example_config_text();

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<IntegratorMethod> method;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<double> gain;
};

/// Runs one verb (check, synthesize, simulate, reproduce-example). Progress
/// goes to out, diagnostics to err; the return value is an ExitCode.
int run(const Options& options, std::ostream& out, std::ostream& err);

/// Command-line entry point.
int main_entry(int argc, char** argv);

}  // namespace qsync::cli
