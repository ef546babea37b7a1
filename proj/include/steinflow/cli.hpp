#pragma once

// Command-line front end. dispatch() runs in-process so tests can call it
// with captured streams; tools/steinflow.cpp is a thin main around it.

#include <Eigen/Core>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "steinflow/config.hpp"
#include "steinflow/continuum.hpp"
#include "steinflow/discrepancy.hpp"
#include "steinflow/io.hpp"
#include "steinflow/svgd.hpp"
#include "steinflow/verify.hpp"

#ifndef STEINFLOW_VERSION
#define STEINFLOW_VERSION "0.0.0"
#endif

namespace steinflow::cli {

inline std::string version_string() {
  std::ostringstream out;
  out << "steinflow " << STEINFLOW_VERSION << " (eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << ", ";
#if defined(__clang__)
  out << "clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  out << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#else
  out << "unknown compiler";
#endif
  out << ")";
  return out.str();
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json meta(const ExperimentConfig& cfg, const std::string& command, std::uint64_t seed,
                           nlohmann::json overrides) {
  nlohmann::json m;
  m["command"] = command;
  m["config_text"] = cfg.text;
  m["seed"] = seed;
  m["overrides"] = std::move(overrides);
  m["version"] = version_string();
  return m;
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool track_density = false;
};

inline int run_svgd(const Common& c) {
  const ExperimentConfig cfg = parse_config(read_file(c.config));
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  RunOptions options = cfg.run;
  options.track_density = options.track_density || c.track_density;
  const TrajectoryRecord record =
      run(*cfg.target, cfg.kernel, cfg.initial_ensemble(seed, options.track_density), cfg.schedule, options);
  io::write_run(c.out, record, io::Axis::Iteration,
                meta(cfg, "run", seed, {{"track_density", options.track_density}}), cfg.svg);
  return 0;
}

inline int run_flow(const Common& c, std::optional<double> t_end, std::optional<double> dt) {
  const ExperimentConfig cfg = parse_config(read_file(c.config));
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  OdeConfig ode = cfg.flow;
  if (t_end) ode.t_end = *t_end;
  if (dt) ode.dt = *dt;
  FlowOptions options;
  options.track_density = cfg.run.track_density || c.track_density;
  options.record_every = cfg.flow_record_every;
  options.snapshot_every = cfg.run.snapshot_every;
  const TrajectoryRecord record = integrate_vlasov(*cfg.target, cfg.kernel,
                                                   cfg.initial_ensemble(seed, options.track_density), ode, options);
  io::write_run(c.out, record, io::Axis::Time,
                meta(cfg, "flow", seed,
                     {{"t_end", ode.t_end}, {"dt", ode.dt}, {"track_density", options.track_density}}),
                cfg.svg);
  return 0;
}

inline int run_langevin_cmd(const Common& c, std::optional<double> t_end, std::optional<double> dt) {
  const ExperimentConfig cfg = parse_config(read_file(c.config));
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  LangevinOptions options = cfg.langevin;
  options.seed = seed;
  if (dt) {
    if (!(*dt > 0.0)) throw ConfigError("--dt must be positive");
    options.epsilon = *dt;
  }
  if (t_end) {
    if (!(*t_end >= 0.0)) throw ConfigError("--t-end must be >= 0");
    options.steps = std::lround(*t_end / options.epsilon);
  }
  const TrajectoryRecord record =
      run_langevin(*cfg.target, cfg.kernel, cfg.initial_ensemble(seed, false), options);
  io::write_run(c.out, record, io::Axis::Time,
                meta(cfg, "langevin", seed, {{"epsilon", options.epsilon}, {"steps", options.steps}}), cfg.svg);
  return 0;
}

inline int run_ksd(const std::string& config, const std::string& points, const std::string& estimator,
                   std::ostream& out) {
  const ExperimentConfig cfg = parse_config(read_file(config));
  const Matrix X = io::read_particles_csv(points);
  const KernelSpec spec = cfg.kernel.resolve(X);
  const DiscrepancyReport r =
      estimator == "ustat" ? ksd_ustat(*cfg.target, spec, X) : ksd_vstat(*cfg.target, spec, X);
  nlohmann::json j;
  j["value"] = r.value;
  j["estimator"] = std::string(to_string(r.estimator));
  j["n_points"] = r.n_points;
  j["bandwidth"] = spec.bandwidth;
  out << j.dump(2) << '\n';
  return 0;
}

inline int run_verify(const std::string& config, const std::string& report, const std::vector<std::string>& only,
                      std::ostream& out) {
  const ExperimentConfig cfg = parse_config(read_file(config));
  const auto results = verify::report_all(cfg.verify, only.empty() ? std::nullopt : std::optional(only));
  nlohmann::json j;
  j["seed"] = cfg.verify.seed;
  j["version"] = version_string();
  j["checks"] = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    j["checks"].push_back({{"name", r.name},
                           {"passed", r.passed},
                           {"observed", r.observed},
                           {"bound_or_target", r.bound_or_target},
                           {"tolerance", r.tolerance},
                           {"details", r.details}});
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.details << '\n';
  }
  j["passed"] = all;
  const std::filesystem::path path(report);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  io::open_for_write(path) << j.dump(2) << '\n';
  return all ? 0 : 1;
}

}  // namespace detail

/// Exit codes: 0 success, 1 failed checks or a numerical failure during a run,
/// 2 usage or configuration errors.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Stein variational gradient descent: runs, flows, diagnostics and checks", "steinflow"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  detail::Common common;
  auto add_common = [&](CLI::App* sub, bool with_track) {
    sub->add_option("--config", common.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--seed", common.seed, "override the config seed");
    if (with_track) sub->add_flag("--track-density", common.track_density, "track per-particle log density and KL");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "iterate the discrete particle update");
  add_common(run_cmd, true);

  std::optional<double> t_end, dt;
  CLI::App* flow_cmd = app.add_subcommand("flow", "integrate the continuous-time particle ODE");
  add_common(flow_cmd, true);
  flow_cmd->add_option("--t-end", t_end, "final time");
  flow_cmd->add_option("--dt", dt, "integrator step");

  CLI::App* langevin_cmd = app.add_subcommand("langevin", "unadjusted Langevin chains, one per particle");
  add_common(langevin_cmd, false);
  langevin_cmd->add_option("--t-end", t_end, "final time");
  langevin_cmd->add_option("--dt", dt, "step size");

  std::string ksd_config, ksd_points, estimator = "vstat";
  CLI::App* ksd_cmd = app.add_subcommand("ksd", "kernelized Stein discrepancy of a point set, as JSON");
  ksd_cmd->add_option("--config", ksd_config, "config giving the target and kernel")->required()->check(CLI::ExistingFile);
  ksd_cmd->add_option("--points", ksd_points, "CSV of points, one row per point")->required()->check(CLI::ExistingFile);
  ksd_cmd->add_option("--estimator", estimator, "vstat or ustat")->check(CLI::IsMember({"vstat", "ustat"}));

  std::string verify_config, report;
  std::vector<std::string> only;
  CLI::App* verify_cmd = app.add_subcommand("verify", "numerical checks of the descent theory");
  verify_cmd->add_option("--config", verify_config, "config with a [verify] section")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--out", report, "report.json path")->required();
  verify_cmd->add_option("--only", only, "run only these checks (repeatable)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (run_cmd->parsed()) return detail::run_svgd(common);
    if (flow_cmd->parsed()) return detail::run_flow(common, t_end, dt);
    if (langevin_cmd->parsed()) return detail::run_langevin_cmd(common, t_end, dt);
    if (ksd_cmd->parsed()) return detail::run_ksd(ksd_config, ksd_points, estimator, out);
    if (verify_cmd->parsed()) return detail::run_verify(verify_config, report, only, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace steinflow::cli
