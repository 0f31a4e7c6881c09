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
#include <string>
#include <vector>

#include "json.hpp"

#include "qsync/solver.hpp"
#include "qsync/sync.hpp"

namespace qsync::cli {

/// Rounds to 12 significant digits; non-finite values pass through.
double round12(double v);

nlohmann::json to_json(double v);
nlohmann::json to_json(Complex z);
nlohmann::json to_json(const RealMatrix& m);
nlohmann::json to_json(const ComplexMatrix& m);

/// Full double precision, so the blocks can be pasted back into a config unchanged.
nlohmann::json to_json_exact(const RealMatrix& m);
nlohmann::json to_json_exact(const ComplexMatrix& m);

nlohmann::json conditions_json(const ConditionReport& r);
nlohmann::json error_dynamics_json(const ErrorDynamics& e);
nlohmann::json certificate_json(const StabilityCertificate& c);
/// Includes an "engineered" member that can be pasted into a configuration.
nlohmann::json synthesis_json(const SynthesisResult& s);

/// Pretty-printed with a trailing newline.
std::string dump(const nlohmann::json& j);

/// Writes to a sibling temporary file, then renames it over path.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string trajectory_csv(const Trajectory& traj);

/// t followed by one error-norm column per trajectory.
std::string error_norms_csv(const std::vector<const Trajectory*>& errors, const std::vector<std::string>& headers);

}  // namespace qsync::cli
