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
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "output.hpp"
#include "qsync/cli.hpp"

namespace qsync::cli {

using nlohmann::json;

namespace {

constexpr double kHomogeneityTolerance = 1e-10;
constexpr double kSettleFraction = 1e-3;

struct Context {
  const Options& opts;
  RunConfig cfg;
  std::filesystem::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

/// Library rejections of otherwise well-formed input.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int field_target(const RunConfig& cfg) {
  int m = cfg.subsystems[0].n_modes();
  for (const auto& s : cfg.subsystems) m = std::max(m, s.n_fields());
  return m;
}

SubsystemParams padded(const SubsystemParams& s, int m) { return m > s.n_fields() ? pad_fields(s, m) : s; }

ComplexMatrix pad_rows(const ComplexMatrix& v, int m) {
  if (v.rows() >= m) return v;
  ComplexMatrix out = ComplexMatrix::Zero(m, v.cols());
  out.topRows(v.rows()) = v;
  return out;
}

bool close(double a, double b) { return std::abs(a - b) <= kHomogeneityTolerance; }

bool same_channel(const KernelChannel& a, const KernelChannel& b) {
  if (a.is_exponential() != b.is_exponential()) return false;
  if (a.is_exponential()) {
    const auto ta = a.terms();
    const auto tb = b.terms();
    if (ta.size() != tb.size()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k) {
      if (!close(ta[k].weight, tb[k].weight) || !close(ta[k].rate, tb[k].rate)) return false;
    }
    return true;
  }
  const auto sa = a.samples();
  const auto sb = b.samples();
  if (!close(a.step(), b.step()) || sa.size() != sb.size()) return false;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    if (!close(sa[k], sb[k])) return false;
  }
  return true;
}

std::optional<std::string> heterogeneity(const SubsystemParams& a, const SubsystemParams& b) {
  const double d_omega = norm2(RealMatrix(a.omega() - b.omega()));
  if (d_omega > kHomogeneityTolerance) {
    return fmt::format(
        "Omega1 must equal Omega2 (||Omega1 - Omega2|| = {:.6g}); synthesis needs identical subsystems, and "
        "different subsystem Hamiltonians violate the symmetry condition Omega1 = Omega2, which synchronization "
        "requires",
        d_omega);
  }
  const double d_v = norm2(ComplexMatrix(a.v() - b.v()));
  if (d_v > kHomogeneityTolerance) {
    return fmt::format("V1 must equal V2 (||V1 - V2|| = {:.6g}); synthesis needs identical subsystems", d_v);
  }
  for (int j = 0; j < a.n_fields(); ++j) {
    if (!same_channel(a.kernel().channel(j), b.kernel().channel(j))) {
      return fmt::format("Gamma1 must equal Gamma2 (channel {} differs); synthesis needs identical subsystems", j);
    }
  }
  return std::nullopt;
}

struct SynthesisOutcome {
  std::optional<SynthesisResult> result;
  json doc;
  int code = kExitOk;
  std::string message;
};

SynthesisOutcome resolve_synthesis(const Context& ctx) {
  SynthesisOutcome o;
  const int m = field_target(ctx.cfg);
  const SubsystemParams s1 = padded(ctx.cfg.subsystems[0], m);
  const SubsystemParams s2 = padded(ctx.cfg.subsystems[1], m);
  const int n = s1.n_modes();
  const json padding = {{"modes", n},
                        {"fields_in", {ctx.cfg.subsystems[0].n_fields(), ctx.cfg.subsystems[1].n_fields()}},
                        {"fields_used", m}};

  if (auto why = heterogeneity(s1, s2)) {
    o.code = kExitCheckFailed;
    o.message = *why;
    o.doc = {{"status", "rejected"}, {"reason", *why}, {"padding", padding}};
    return o;
  }

  const double jw_norm = norm2(RealMatrix(symplectic(n) * s1.omega()));
  const double delay = moments(s1.kernel(), n).mean_delay;
  std::string source;
  double a = 0.0;
  if (ctx.opts.gain) {
    a = *ctx.opts.gain;
    source = "flag";
  } else if (ctx.cfg.gain) {
    a = *ctx.cfg.gain;
    source = "config";
  } else {
    const auto found = find_gain(s1.omega(), s1.kernel());
    if (!found) {
      o.code = kExitCheckFailed;
      o.message = fmt::format(
          "no gain found: the kernel mean delay {:.12g} is not below the gain threshold for any searched gain", delay);
      o.doc = {{"status", "gain_not_found"},
               {"reason", o.message},
               {"mean_delay", to_json(delay)},
               {"norm_j_omega1", to_json(jw_norm)},
               {"padding", padding}};
      return o;
    }
    a = *found;
    source = "search";
  }
  if (!(a > jw_norm)) {
    throw InputError(fmt::format("gain {:.12g} must exceed ||J Omega1|| = {:.12g}", a, jw_norm));
  }

  o.result = synthesize(s1, a);
  o.doc = synthesis_json(*o.result);
  o.doc["gain_source"] = source;
  o.doc["gain_threshold"] = to_json(gain_threshold(s1.omega(), s1.kernel(), a));
  o.doc["mean_delay"] = to_json(delay);
  o.doc["norm_j_omega1"] = to_json(jw_norm);
  o.doc["padding"] = padding;
  return o;
}

AugmentedSystem engineered_system(const RunConfig& cfg, const EngineeredBlocks& b) {
  const int m = field_target(cfg);
  return AugmentedSystem(padded(cfg.subsystems[0], m), padded(cfg.subsystems[1], m), b.omega12, pad_rows(b.v12, m),
                         pad_rows(b.v21, m));
}

AugmentedSystem synthesized_system(const RunConfig& cfg, const SynthesisResult& s) {
  const int m = field_target(cfg);
  return AugmentedSystem(padded(cfg.subsystems[0], m), padded(cfg.subsystems[1], m), s.omega12, s.v12, s.v21);
}

std::filesystem::path out_path(const Context& ctx, const std::string& name) { return ctx.out_dir / name; }

void emit(const Context& ctx, const std::string& name, const std::string& content) {
  write_atomic(out_path(ctx, name), content);
  ctx.out << "wrote " << out_path(ctx, name).string() << "\n";
}

/// The augmented system to work on: engineered blocks from the config, or
/// synthesized ones. Empty with code set when synthesis fails.
struct SystemChoice {
  std::optional<AugmentedSystem> aug;
  std::optional<SynthesisOutcome> synthesis;
  int code = kExitOk;
};

SystemChoice choose_system(const Context& ctx) {
  SystemChoice c;
  if (ctx.cfg.engineered) {
    c.aug = engineered_system(ctx.cfg, *ctx.cfg.engineered);
    return c;
  }
  c.synthesis = resolve_synthesis(ctx);
  if (!c.synthesis->result) {
    c.code = c.synthesis->code;
    ctx.err << "synthesis failed: " << c.synthesis->message << "\n";
    return c;
  }
  c.aug = synthesized_system(ctx.cfg, *c.synthesis->result);
  return c;
}

int cmd_synthesize(const Context& ctx) {
  const auto o = resolve_synthesis(ctx);
  emit(ctx, "synthesis.json", dump(o.doc));
  if (!o.result) {
    ctx.err << "synthesis failed: " << o.message << "\n";
    return o.code;
  }
  ctx.out << fmt::format("synthesize: gain a = {:.12g} ({}), threshold {:.12g}, mean delay {:.12g}\n",
                         o.result->gain_a, o.doc["gain_source"].get<std::string>(),
                         o.doc["gain_threshold"].is_null() ? INFINITY : o.doc["gain_threshold"].get<double>(),
                         o.doc["mean_delay"].get<double>());
  return kExitOk;
}

int cmd_check(const Context& ctx) {
  const auto choice = choose_system(ctx);
  json report;
  report["engineered_source"] = ctx.cfg.engineered ? "config" : "synthesized";
  if (choice.synthesis) report["synthesis"] = choice.synthesis->doc;
  if (!choice.aug) {
    report["status"] = "synthesis_failed";
    report["conditions"] = nullptr;
    report["error_dynamics"] = nullptr;
    report["certificate"] = nullptr;
    emit(ctx, "report.json", dump(report));
    return choice.code;
  }

  const auto& aug = *choice.aug;
  const auto conditions = check_conditions(aug, default_condition_samples(aug));
  report["conditions"] = conditions_json(conditions);
  bool passes = false;
  if (conditions.sufficient) {
    const auto err = error_dynamics(aug);
    const auto cert = certify_stability(err);
    report["error_dynamics"] = error_dynamics_json(err);
    report["certificate"] = certificate_json(cert);
    passes = cert.passes;
    ctx.out << fmt::format("check: conditions sufficient; certificate {} (mean delay {:.12g}, threshold {:.12g}, "
                           "lambda1 {:.12g}{:+.12g}i)\n",
                           cert.passes ? "passes" : "fails: " + to_string(cert.cause), cert.mean_delay, cert.threshold,
                           cert.lambda1.real(), cert.lambda1.imag());
  } else {
    report["error_dynamics"] = nullptr;
    report["certificate"] = nullptr;
    std::string failed;
    if (!conditions.balance_holds) failed += " hamiltonian_balance";
    if (!conditions.kernel_balance_holds) failed += " kernel_balance";
    if (!conditions.symmetry_holds) failed += " hamiltonian_symmetry";
    ctx.out << "check: synchronization conditions fail:" << failed
            << (conditions.necessary_violated ? " (a necessary condition is violated)" : "") << "\n";
  }
  report["status"] = passes ? "passes" : "fails";
  emit(ctx, "report.json", dump(report));
  return passes ? kExitOk : kExitCheckFailed;
}

struct ScenarioRun {
  std::optional<AugmentedTrajectory> traj;
  std::optional<DivergenceError> diverged;
  double initial_error = 0.0;
};

IntegratorSpec integrator_spec(const Context& ctx, const AugmentedSystem& aug) {
  IntegratorSpec spec;
  const bool exponential = aug.kernel().is_exponential();
  spec.method = exponential ? IntegratorMethod::kExponentialLift : IntegratorMethod::kConvolutionQuadrature;
  if (ctx.cfg.method) spec.method = *ctx.cfg.method;
  if (ctx.opts.method) spec.method = *ctx.opts.method;
  if (ctx.cfg.dt) spec.dt = *ctx.cfg.dt;
  if (ctx.opts.dt) spec.dt = *ctx.opts.dt;
  if (ctx.cfg.horizon) spec.horizon = *ctx.cfg.horizon;
  if (ctx.opts.horizon) spec.horizon = *ctx.opts.horizon;
  if (ctx.cfg.kernel_cutoff) spec.kernel_cutoff = *ctx.cfg.kernel_cutoff;
  if (spec.method == IntegratorMethod::kExponentialLift && !exponential) {
    throw InputError("the exponential lift needs exponential kernels; use --method cq for tabulated kernels");
  }
  try {
    (void)spec.steps();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return spec;
}

std::vector<ScenarioRun> run_scenarios(const Context& ctx, const AugmentedSystem& aug, const IntegratorSpec& spec) {
  const auto& scenarios = ctx.cfg.scenarios;
  const GeneratorSet gens = augment(aug);
  std::optional<MemoizedGenerator> memo;
  if (spec.method == IntegratorMethod::kConvolutionQuadrature) memo.emplace(gens.a_k, spec.dt);

  std::vector<ScenarioRun> runs(scenarios.size());
  std::vector<std::exception_ptr> failures(scenarios.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        const int n = aug.n_modes();
        RealVector xi0(4 * n);
        xi0 << coherent_expectations(scenarios[i].alphas1), coherent_expectations(scenarios[i].alphas2);
        runs[i].initial_error = (xi0.head(2 * n) - xi0.tail(2 * n)).norm();
        runs[i].traj = simulate_augmented(gens, memo ? &*memo : nullptr, xi0, spec);
      } catch (const DivergenceError& e) {
        runs[i].diverged = e;
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(scenarios.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return runs;
}

json settle_time(const Trajectory& err, double initial) {
  const double target = kSettleFraction * initial;
  for (std::size_t k = 0; k < err.norms.size(); ++k) {
    if (err.norms[k] <= target) return to_json(err.times[k]);
  }
  return nullptr;
}

int simulate_and_emit(const Context& ctx, const AugmentedSystem& aug, std::vector<ScenarioRun>* keep) {
  if (ctx.cfg.scenarios.empty()) throw InputError("the configuration lists no scenarios to simulate");
  const auto spec = integrator_spec(ctx, aug);
  auto runs = run_scenarios(ctx, aug, spec);

  json summary;
  summary["method"] = spec.method == IntegratorMethod::kExponentialLift ? "lift" : "cq";
  summary["dt"] = to_json(spec.dt);
  summary["horizon"] = to_json(spec.horizon);
  summary["kernel_cutoff"] = to_json(spec.kernel_cutoff);
  summary["settle_fraction"] = kSettleFraction;
  summary["scenarios"] = json::array();
  int code = kExitOk;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& sc = ctx.cfg.scenarios[i];
    const auto& r = runs[i];
    json entry = {{"name", sc.name}, {"initial_error_norm", to_json(r.initial_error)}};
    if (r.diverged) {
      entry["status"] = "diverged";
      entry["divergence_time"] = to_json(r.diverged->time());
      entry["message"] = r.diverged->what();
      ctx.err << "scenario " << sc.name << ": " << r.diverged->what() << "\n";
      code = kExitDiverged;
    } else {
      const auto& t = *r.traj;
      entry["status"] = "ok";
      entry["final_time"] = to_json(t.error.times.back());
      entry["final_error_norm"] = to_json(t.error.norms.back());
      entry["max_error_norm"] = to_json(*std::max_element(t.error.norms.begin(), t.error.norms.end()));
      entry["settle_time"] = settle_time(t.error, r.initial_error);
      entry["memory_window"] = t.state.memory_window ? to_json(*t.state.memory_window) : json(nullptr);
      emit(ctx, "traj_" + sc.name + ".csv", trajectory_csv(t.state));
      emit(ctx, "err_" + sc.name + ".csv", trajectory_csv(t.error));
      ctx.out << fmt::format("simulate {}: |e(0)| = {:.12g}, |e(T)| = {:.12g}\n", sc.name, r.initial_error,
                             t.error.norms.back());
    }
    summary["scenarios"].push_back(std::move(entry));
  }
  emit(ctx, "summary.json", dump(summary));
  if (keep) *keep = std::move(runs);
  return code;
}

int cmd_simulate(const Context& ctx) {
  const auto choice = choose_system(ctx);
  if (!choice.aug) return choice.code;
  return simulate_and_emit(ctx, *choice.aug, nullptr);
}

int cmd_reproduce(const Context& ctx) {
  emit(ctx, "config.json", example_config_text());
  int code = cmd_synthesize(ctx);
  const int check = cmd_check(ctx);
  if (code == kExitOk) code = check;

  const auto choice = choose_system(ctx);
  if (!choice.aug) return code == kExitOk ? choice.code : code;
  std::vector<ScenarioRun> runs;
  const int sim = simulate_and_emit(ctx, *choice.aug, &runs);
  if (code == kExitOk) code = sim;

  std::vector<const Trajectory*> errors;
  std::vector<std::string> headers;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].traj) continue;
    errors.push_back(&runs[i].traj->error);
    headers.push_back("|e|_" + ctx.cfg.scenarios[i].name);
  }
  if (!errors.empty()) emit(ctx, "fig1_data.csv", error_norms_csv(errors, headers));
  return code;
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg;
    if (options.command == "reproduce-example") {
      cfg = parse_config(example_config_text(), "config.json");
    } else {
      if (!options.config) {
        err << "error: --config is required for " << options.command << "\n";
        return kExitConfigError;
      }
      cfg = load_config(*options.config);
    }
    std::filesystem::path dir = options.out ? *options.out : (cfg.output ? std::filesystem::path(*cfg.output) : ".");
    std::filesystem::create_directories(dir);
    const Context ctx{options, std::move(cfg), dir, out, err};

    if (options.command == "check") return cmd_check(ctx);
    if (options.command == "synthesize") return cmd_synthesize(ctx);
    if (options.command == "simulate") return cmd_simulate(ctx);
    if (options.command == "reproduce-example") return cmd_reproduce(ctx);
    err << "error: unknown command \"" << options.command << "\"\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Expectation synchronization of non-Markovian linear quantum systems"};
  app.require_subcommand(1);
  Options opts;
  std::string config, out, method;
  double dt = 0.0, horizon = 0.0, gain = 0.0;

  const auto add_common = [&](CLI::App* sub, bool needs_config, bool integrates) {
    if (needs_config) sub->add_option("--config", config, "JSON configuration file")->required();
    sub->add_option("--out", out, "Output directory (default: the config's \"output\", else .)");
    sub->add_option("--gain", gain, "Gain a for the synthesized coupling (default: config, else searched)")
        ->check(CLI::PositiveNumber);
    if (integrates) {
      sub->add_option("--method", method, "Integrator: cq (convolution quadrature) or lift (exponential lift)")
          ->check(CLI::IsMember({"cq", "lift"}));
      sub->add_option("--dt", dt, "Time step")->check(CLI::PositiveNumber);
      sub->add_option("--horizon", horizon, "Final time")->check(CLI::PositiveNumber);
    }
  };
  add_common(app.add_subcommand("check", "Check the synchronization conditions and certify stability; writes report.json"),
             true, false);
  add_common(app.add_subcommand("synthesize", "Synthesize the coupling blocks; writes synthesis.json"), true, false);
  add_common(app.add_subcommand("simulate", "Simulate every scenario; writes traj_*.csv, err_*.csv, summary.json"),
             true, true);
  add_common(app.add_subcommand("reproduce-example", "Run the built-in two-mode example end to end"), false, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  opts.command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  if (!config.empty()) opts.config = config;
  if (sub->count("--out") > 0) opts.out = out;
  if (sub->count("--gain") > 0) opts.gain = gain;
  if (sub->get_option_no_throw("--method") != nullptr && sub->count("--method") > 0) {
    opts.method = method == "lift" ? IntegratorMethod::kExponentialLift : IntegratorMethod::kConvolutionQuadrature;
  }
  if (sub->get_option_no_throw("--dt") != nullptr && sub->count("--dt") > 0) opts.dt = dt;
  if (sub->get_option_no_throw("--horizon") != nullptr && sub->count("--horizon") > 0) opts.horizon = horizon;
  return run(opts, std::cout, std::cerr);
}

}  // namespace qsync::cli
