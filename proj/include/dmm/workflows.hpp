#pragma once

// Batch workflows behind the command line: solve, simulate, statics. Each
// produces CSV tables (FigureBundle) that hold the data of one figure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "dmm/config.hpp"
#include "dmm/csv.hpp"
#include "dmm/error.hpp"
#include "dmm/grid.hpp"
#include "dmm/model.hpp"
#include "dmm/policy.hpp"
#include "dmm/simulator.hpp"
#include "dmm/solver.hpp"

namespace dmm {

/// Named tables; each is written to <name>.csv.
struct FigureBundle {
  std::map<std::string, CsvTable> tables;
};

struct SolveOutcome {
  ModelParams params;
  InventoryGrid grid;
  ValueSurface surface;
  PolicyTable policy;      // stationary controls, t = 0
  double stationarity_gap = 0.0;
};

inline SolveOutcome run_solve(const ModelParams& params, std::size_t nodes, const SolverOptions& options) {
  InventoryGrid grid(params.q_max, nodes, params.sizes);
  auto surface = solve(params, grid, options);
  auto policy = extract_policy(surface, params, grid, 0.0, options.ramp_width);
  const double gap = stationarity_gap(surface, params, grid, options.ramp_width);
  return {params, std::move(grid), std::move(surface), std::move(policy), gap};
}

inline SolveOutcome run_solve(const RunConfig& cfg) { return run_solve(cfg.model, cfg.grid_nodes, cfg.solver); }

namespace detail {

inline std::string size_label(double z) { return format_number(z); }

inline std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace detail

/// Wide per-node policy table, the input format of `simulate`.
inline CsvTable policy_table(const PolicyTable& policy) {
  CsvTable t;
  t.header = {"q", "theta0", "exec_rate", "buy_rate", "sell_rate"};
  for (double z : policy.sizes) t.header.push_back("bid_" + detail::size_label(z));
  for (double z : policy.sizes) t.header.push_back("ask_" + detail::size_label(z));
  for (std::size_t i = 0; i < policy.size(); ++i) {
    std::vector<std::string> row{format_number(policy.q[i]), format_number(policy.theta[i]),
                                 format_number(policy.exec_rate[i]), format_number(policy.buy_rate[i]),
                                 format_number(policy.sell_rate[i])};
    for (const auto& v : policy.bid[i]) row.push_back(detail::optional_cell(v));
    for (const auto& v : policy.ask[i]) row.push_back(detail::optional_cell(v));
    t.add_row(std::move(row));
  }
  return t;
}

/// Rebuilds a PolicyTable from its CSV form. The lattice and size buckets
/// must agree with `params`.
inline PolicyTable policy_from_table(const CsvTable& t, const ModelParams& params,
                                     std::optional<double> ramp_width = std::nullopt) {
  PolicyTable p;
  p.sizes = params.sizes.sizes;
  const std::size_t nb = p.sizes.size();
  const std::size_t cq = t.column("q"), cth = t.column("theta0"), cr = t.column("exec_rate"),
                    cb = t.column("buy_rate"), cs = t.column("sell_rate");
  std::vector<std::size_t> bid_cols, ask_cols;
  for (double z : p.sizes) {
    bid_cols.push_back(t.column("bid_" + detail::size_label(z)));
    ask_cols.push_back(t.column("ask_" + detail::size_label(z)));
  }
  if (t.header.size() != 5 + 2 * nb) throw InvalidArgument("policy CSV: size buckets do not match the config");
  if (t.rows.size() < 3) throw InvalidArgument("policy CSV: too few rows");

  auto required = [](const std::string& cell) {
    const auto v = parse_number(cell);
    if (!v) throw InvalidArgument("policy CSV: empty required cell");
    return *v;
  };
  for (const auto& row : t.rows) {
    p.q.push_back(required(row[cq]));
    p.theta.push_back(required(row[cth]));
    p.exec_rate.push_back(required(row[cr]));
    p.buy_rate.push_back(required(row[cb]));
    p.sell_rate.push_back(required(row[cs]));
    std::vector<std::optional<double>> bid(nb), ask(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      bid[k] = parse_number(row[bid_cols[k]]);
      ask[k] = parse_number(row[ask_cols[k]]);
    }
    p.bid.push_back(std::move(bid));
    p.ask.push_back(std::move(ask));
  }
  const std::size_t n = p.q.size();
  p.q_max = p.q.back();
  p.step = (p.q.back() - p.q.front()) / static_cast<double>(n - 1);
  const double tol = 1e-9 * std::max(1.0, p.q_max);
  if (std::abs(p.q.front() + p.q_max) > tol || std::abs(p.q_max - params.q_max) > tol)
    throw InvalidArgument("policy CSV: inventory range does not match q_max of the config");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(p.q[i] - (p.q.front() + p.step * static_cast<double>(i))) > tol)
      throw InvalidArgument("policy CSV: inventory nodes are not uniformly spaced");
  p.ramp_width = ramp_width.value_or(p.step);
  return p;
}

/// value_function, exec_rate, quotes, convergence and policy tables.
inline FigureBundle solve_bundle(const SolveOutcome& out) {
  FigureBundle b;
  const PolicyTable& pol = out.policy;
  const ModelParams& params = out.params;

  CsvTable value{{"q", "theta0"}, {}};
  CsvTable rate{{"q", "v_star"}, {}};
  for (std::size_t i = 0; i < pol.size(); ++i) {
    value.add_row({format_number(pol.q[i]), format_number(pol.theta[i])});
    rate.add_row({format_number(pol.q[i]), format_number(pol.exec_rate[i])});
  }

  // Quotes for a side without flow are meaningless and left empty.
  CsvTable quotes{{"q", "side", "size", "delta"}, {}};
  const std::size_t n = pol.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const char* side : {"ask", "bid"}) {
      const bool is_bid = side[0] == 'b';
      const bool flow = is_bid ? params.bid_curve.has_flow() : params.ask_curve.has_flow();
      for (std::size_t k = 0; k < pol.sizes.size(); ++k) {
        const std::size_t off = out.grid.offset(k);
        const bool reachable = is_bid ? i + off < n : i >= off;
        if (!reachable) continue;
        const auto& v = is_bid ? pol.bid[i][k] : pol.ask[i][k];
        quotes.add_row({format_number(pol.q[i]), side, format_number(pol.sizes[k]),
                        flow ? detail::optional_cell(v) : std::string()});
      }
    }
  }

  // Controls through time for inventories on a 5 M$ stride (or every node
  // on coarse lattices), about 100 time samples.
  CsvTable conv{{"t", "q", "control", "value"}, {}};
  const std::size_t steps = out.surface.time_count() - 1;
  const std::size_t tstride = std::max<std::size_t>(1, steps / 100);
  const auto qstride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(5.0 / out.grid.step())));
  for (std::size_t ti = 0; ti < steps; ti += tstride) {
    const double t = out.surface.times()[ti];
    const auto snap = extract_policy(out.surface, params, out.grid, t, pol.ramp_width);
    for (std::size_t i = 0; i < n; i += qstride) {
      std::vector<std::pair<std::string, std::string>> controls;
      for (std::size_t k = 0; k < pol.sizes.size(); ++k)
        controls.emplace_back("bid_" + detail::size_label(pol.sizes[k]),
                              params.bid_curve.has_flow() ? detail::optional_cell(snap.bid[i][k]) : "");
      controls.emplace_back("exec_rate", format_number(snap.exec_rate[i]));
      std::sort(controls.begin(), controls.end());
      for (auto& [name, cell] : controls) conv.add_row({format_number(t), format_number(pol.q[i]), name, cell});
    }
  }

  b.tables["value_function"] = std::move(value);
  b.tables["exec_rate"] = std::move(rate);
  b.tables["quotes"] = std::move(quotes);
  b.tables["convergence"] = std::move(conv);
  b.tables["policy"] = policy_table(pol);
  return b;
}

/// Per start inventory: PDE value, Monte Carlo mean and standard error, and
/// z = (mean - pde) / stderr (empty for a single path).
inline CsvTable mc_check_table(const PolicyTable& policy, const ModelParams& params, const SimConfig& sim) {
  const SimStats stats = estimate_value(policy, params, sim);
  CsvTable t{{"q0", "theta_pde", "mc_mean", "mc_stderr", "z_score"}, {}};
  auto entries = stats.entries;
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.q0 < b.q0; });
  for (const auto& e : entries) {
    const double pde = policy.theta[policy.nearest(e.q0)];
    const std::string z =
        e.single_sample || e.std_error == 0.0 ? std::string() : format_number((e.mean_objective - pde) / e.std_error);
    t.add_row({format_number(e.q0), format_number(pde), format_number(e.mean_objective), format_number(e.std_error), z});
  }
  return t;
}

struct StaticsOutcome {
  std::vector<double> sweep_values;  // sorted ascending
  std::vector<InternalizationZone> zones;
  std::vector<PolicyTable> policies;
};

/// Solves once per sweep value. Entries run on up to `threads` threads;
/// the output order is by sweep value regardless.
inline StaticsOutcome run_statics(const RunConfig& cfg, unsigned threads = 1) {
  if (!cfg.sweep || cfg.sweep->values.size() < 2)
    throw InvalidArgument("statics: the config needs a sweep with at least two values");
  StaticsOutcome out;
  out.sweep_values = cfg.sweep->values;
  std::sort(out.sweep_values.begin(), out.sweep_values.end());
  const std::size_t n = out.sweep_values.size();
  out.zones.resize(n);
  out.policies.resize(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t i) {
    try {
      const ModelParams p = apply_sweep(cfg.model, cfg.sweep->parameter, out.sweep_values[i]);
      auto solved = run_solve(p, cfg.grid_nodes, cfg.solver);
      out.zones[i] = internalization_zone(solved.policy);
      out.policies[i] = std::move(solved.policy);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  for (std::size_t start = 0; start < n; start += threads) {
    std::vector<std::thread> pool;
    const std::size_t end = std::min(n, start + threads);
    if (threads == 1) work(start);
    else
      for (std::size_t i = start; i < end; ++i) pool.emplace_back(work, i);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(e.time_index(), e.iterations(), e.residual());
    } catch (const std::exception& e) {
      throw Error("statics: " + cfg.sweep->parameter + " = " + format_number(out.sweep_values[i]) + ": " + e.what());
    }
  }
  return out;
}

/// internalization table plus the execution rate curve of every sweep value.
inline FigureBundle statics_bundle(const StaticsOutcome& s) {
  FigureBundle b;
  CsvTable zone{{"sweep_value", "q_low", "q_high", "width"}, {}};
  CsvTable curves{{"sweep_value", "q", "v_star"}, {}};
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i) {
    const auto& z = s.zones[i];
    zone.add_row({format_number(s.sweep_values[i]), format_number(z.q_low), format_number(z.q_high),
                  format_number(z.width)});
    const auto& pol = s.policies[i];
    for (std::size_t j = 0; j < pol.size(); ++j)
      curves.add_row({format_number(s.sweep_values[i]), format_number(pol.q[j]), format_number(pol.exec_rate[j])});
  }
  b.tables["internalization"] = std::move(zone);
  b.tables["exec_rate_sweep"] = std::move(curves);
  return b;
}

/// Writes every table plus resolved_config.json (defaults materialized,
/// artifact version, provenance) into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const FigureBundle& bundle, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, table] : bundle.tables) write_csv_file((dir / (name + ".csv")).string(), table);
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw Error("cannot write resolved_config.json in '" + dir.string() + "'");
  out << resolved_config(cfg).dump(2) << '\n';
}

}  // namespace dmm
