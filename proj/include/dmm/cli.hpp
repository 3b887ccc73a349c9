#pragma once

// Command line front end: solve, simulate, statics. Kept in a header so the
// tests can drive it without spawning processes.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmm/config.hpp"
#include "dmm/csv.hpp"
#include "dmm/error.hpp"
#include "dmm/workflows.hpp"

namespace dmm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,  // bad arguments or unreadable/unwritable files
  kConfig = 2,
  kNoConvergence = 3,
  kSimulation = 4,
};

struct Options {
  std::string config;
  std::string out;
  std::string policy;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

inline RunConfig load_with_overrides(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) {
    cfg.sim.seed = *o.seed;
    cfg.provenance.push_back("sim.seed set from --seed");
  }
  if (o.threads) {
    cfg.sim.threads = o.threads;
    cfg.provenance.push_back("threads capped at " + std::to_string(o.threads) + " from --threads");
  }
  return cfg;
}

inline int cmd_solve(const Options& o, std::ostream& log) {
  const RunConfig cfg = load_with_overrides(o);
  const auto out = run_solve(cfg);
  write_outputs(o.out, solve_bundle(out), cfg);
  const auto zone = internalization_zone(out.policy);
  const std::size_t mid = out.policy.nearest(0.0);
  log << "theta(0, 0) = " << format_number(out.policy.theta[mid]) << '\n'
      << "internalization zone = [" << zone.q_low << ", " << zone.q_high << "] (" << zone.node_count << " nodes)\n"
      << "stationarity gap = " << format_number(out.stationarity_gap) << '\n'
      << "rate cap nodes = " << out.policy.caps.rate_cap_nodes
      << ", quote floor pairs = " << out.policy.caps.quote_floor_nodes << '\n';
  return kOk;
}

inline int cmd_simulate(const Options& o, std::ostream& log) {
  const RunConfig cfg = load_with_overrides(o);
  CsvTable table;
  try {
    table = read_csv_file(o.policy);
  } catch (const InvalidArgument& e) {
    throw ConfigError({std::string("policy: ") + e.what()});
  }
  PolicyTable policy;
  try {
    policy = policy_from_table(table, cfg.model, cfg.solver.ramp_width);
    cfg.sim.validate(cfg.model, policy);
  } catch (const InvalidArgument& e) {
    throw ConfigError({std::string("policy: ") + e.what()});
  }
  FigureBundle b;
  b.tables["mc_check"] = mc_check_table(policy, cfg.model, cfg.sim);
  write_outputs(o.out, b, cfg);
  log << "paths per start = " << cfg.sim.n_paths << ", starts = " << cfg.sim.start_inventories.size() << '\n';
  return kOk;
}

inline int cmd_statics(const Options& o, std::ostream& log) {
  const RunConfig cfg = load_with_overrides(o);
  if (!cfg.sweep) throw ConfigError({"statics needs a 'sweep' section"});
  const unsigned threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto s = run_statics(cfg, threads);
  write_outputs(o.out, statics_bundle(s), cfg);
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i)
    log << cfg.sweep->parameter << " = " << format_number(s.sweep_values[i]) << ": zone [" << s.zones[i].q_low
        << ", " << s.zones[i].q_high << "], width " << s.zones[i].width << '\n';
  return kOk;
}

/// Parses argv and runs one subcommand; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dealer market making: HJB solver and Monte Carlo validator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--threads", o.threads, "cap on worker threads")->check(CLI::PositiveNumber);
  };
  auto* solve_cmd = app.add_subcommand("solve", "solve the value function and write the policy");
  common(solve_cmd);
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo check of a policy against the PDE value");
  common(sim_cmd);
  sim_cmd->add_option("--policy", o.policy, "policy.csv written by solve")->required()->check(CLI::ExistingFile);
  auto* statics_cmd = app.add_subcommand("statics", "internalization zone across a parameter sweep");
  common(statics_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(o, log);
    if (sim_cmd->parsed()) return cmd_simulate(o, log);
    return cmd_statics(o, log);
  } catch (const ConfigError& e) {
    err << "config error:\n";
    for (const auto& p : e.problems()) err << "  " << p << '\n';
    return kConfig;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const SimulationError& e) {
    err << "simulation failed: " << e.what() << '\n';
    return kSimulation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace dmm::cli
