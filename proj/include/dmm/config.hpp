#pragma once

// JSON run configuration.
//
//   {
//     "model": {
//       "sigma": 50, "impact_k": 0.005, "gamma": 0.0005, "horizon_T": 0.05,
//       "q_max": 100, "delta_floor": 10,                          (optional)
//       "bid_curve": {"lambda_max": 1000, "alpha": -1, "beta": 10},
//       "ask_curve": {"lambda_max": 1000, "alpha": -1, "beta": 10},
//       "sizes": {"sizes": [1, 5, 10, 20], "probs": [0.76, 0.15, 0.075, 0.015]},
//       "cost": {"eta": 1e-5, "phi": 0.1, "v_max": 5000}          (v_max optional)
//     },
//     "grid":   {"nodes": 201},                                    (optional)
//     "solver": {"n_steps": 500, "tolerance": 1e-10, "max_iterations": 500,
//                "damping": 0.5, "ramp_width": 1.0},               (all optional)
//     "sim":    {"n_paths": 10000, "dt_sim": 1e-5, "seed": 1,
//                "start_inventories": [-100, ..., 100]},          (all optional)
//     "sweep":  {"parameter": "phi", "values": [0.1, 0.3]}         (optional)
//   }
//
// Unknown keys are rejected. Every default that gets applied is recorded
// in RunConfig::provenance.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmm/error.hpp"
#include "dmm/grid.hpp"
#include "dmm/model.hpp"
#include "dmm/simulator.hpp"
#include "dmm/solver.hpp"

namespace dmm {

inline constexpr const char* kVersion = "1.0.0";

inline const std::set<std::string>& sweep_parameters() {
  static const std::set<std::string> names{"phi", "impact_k", "gamma", "lambda_scale", "lambda_bid", "lambda_ask"};
  return names;
}

struct Sweep {
  std::string parameter;
  std::vector<double> values;
};

/// Copy of `base` with one sweep parameter set to `value`.
inline ModelParams apply_sweep(ModelParams base, const std::string& parameter, double value) {
  if (parameter == "phi") base.cost.phi = value;
  else if (parameter == "impact_k") base.impact_k = value;
  else if (parameter == "gamma") base.gamma = value;
  else if (parameter == "lambda_scale") {
    base.bid_curve.lambda_max *= value;
    base.ask_curve.lambda_max *= value;
  } else if (parameter == "lambda_bid") base.bid_curve.lambda_max = value;
  else if (parameter == "lambda_ask") base.ask_curve.lambda_max = value;
  else throw InvalidArgument("unknown sweep parameter '" + parameter + "'");
  return base;
}

struct RunConfig {
  ModelParams model;
  std::size_t grid_nodes = 201;
  SolverOptions solver;
  SimConfig sim;
  std::optional<Sweep> sweep;
  std::vector<std::string> provenance;  // applied defaults, one line each
};

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
  std::vector<std::string> errors;
  std::vector<std::string> provenance;

  // Returns the sub-object at `key` (empty object when absent and optional).
  const json* object(const json& parent, const std::string& path, const std::string& key, bool required,
                     const std::set<std::string>& allowed) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!parent.is_object() || !parent.contains(key)) {
      // Required keys beneath a missing section are reported by the callers.
      if (required) errors.push_back(where + ": required section missing");
      return nullptr;
    }
    const json& node = parent.at(key);
    if (!node.is_object()) {
      errors.push_back(where + ": expected an object");
      return nullptr;
    }
    for (auto it = node.begin(); it != node.end(); ++it)
      if (!allowed.count(it.key())) errors.push_back(where + "." + it.key() + ": unknown key");
    return &node;
  }

  double number(const json* obj, const std::string& path, const std::string& key,
                std::optional<double> fallback = std::nullopt) {
    const std::string where = path + "." + key;
    if (!obj || !obj->contains(key)) {
      if (fallback) {
        provenance.push_back("default " + where + " = " + json(*fallback).dump());
        return *fallback;
      }
      errors.push_back(where + ": required key missing");
      return 0.0;
    }
    const json& v = obj->at(key);
    if (!v.is_number()) {
      errors.push_back(where + ": expected a number");
      return 0.0;
    }
    return v.get<double>();
  }

  std::vector<double> numbers(const json* obj, const std::string& path, const std::string& key,
                              std::optional<std::vector<double>> fallback = std::nullopt) {
    const std::string where = path + "." + key;
    if (!obj || !obj->contains(key)) {
      if (fallback) {
        provenance.push_back("default " + where + " = " + json(*fallback).dump());
        return *fallback;
      }
      errors.push_back(where + ": required key missing");
      return {};
    }
    const json& v = obj->at(key);
    std::vector<double> out;
    if (!v.is_array()) {
      errors.push_back(where + ": expected an array of numbers");
      return out;
    }
    for (const auto& x : v) {
      if (!x.is_number()) {
        errors.push_back(where + ": expected an array of numbers");
        return {};
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  template <class Int>
  Int integer(const json* obj, const std::string& path, const std::string& key, Int fallback, Int minimum) {
    const std::string where = path + "." + key;
    if (!obj || !obj->contains(key)) {
      provenance.push_back("default " + where + " = " + std::to_string(fallback));
      return fallback;
    }
    const json& v = obj->at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(minimum)) {
      errors.push_back(where + ": expected an integer >= " + std::to_string(minimum));
      return fallback;
    }
    return static_cast<Int>(v.get<long long>());
  }

  IntensityCurve curve(const json& model, const std::string& name) {
    const json* c = object(model, "model", name, true, {"lambda_max", "alpha", "beta"});
    const std::string path = "model." + name;
    return {number(c, path, "lambda_max"), number(c, path, "alpha"), number(c, path, "beta")};
  }

  void check(auto&& fn) {
    try {
      fn();
    } catch (const InvalidArgument& e) {
      errors.push_back(e.what());
    }
  }
};

inline std::string line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline std::vector<double> default_start_inventories(double q_max) {
  std::vector<double> out;
  for (int i = -10; i <= 10; ++i) out.push_back(q_max * i / 10.0);
  return out;
}

}  // namespace detail

/// Parses and validates a configuration document. Throws ConfigError listing
/// every problem found (parse errors carry line and column).
inline RunConfig parse_config(const std::string& text) {
  using nlohmann::json;
  json doc;
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError({"parse error at " + detail::line_and_column(text, e.byte) + ": " + e.what()});
    }
  }
  if (!doc.is_object()) throw ConfigError({"config: top-level value must be an object"});

  detail::ConfigReader rd;
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!std::set<std::string>{"model", "grid", "solver", "sim", "sweep"}.count(it.key()))
      rd.errors.push_back(it.key() + ": unknown key");

  RunConfig cfg;
  const json empty = json::object();
  const json* model = rd.object(doc, "", "model", true,
                                {"sigma", "impact_k", "gamma", "horizon_T", "q_max", "delta_floor", "bid_curve",
                                 "ask_curve", "sizes", "cost"});
  const json& m = model ? *model : empty;
  ModelParams& p = cfg.model;
  p.sigma = rd.number(model, "model", "sigma");
  p.impact_k = rd.number(model, "model", "impact_k");
  p.gamma = rd.number(model, "model", "gamma");
  p.horizon_T = rd.number(model, "model", "horizon_T");
  p.q_max = rd.number(model, "model", "q_max");
  p.delta_floor = rd.number(model, "model", "delta_floor", 10.0);
  p.bid_curve = rd.curve(m, "bid_curve");
  p.ask_curve = rd.curve(m, "ask_curve");
  const json* sizes = rd.object(m, "model", "sizes", true, {"sizes", "probs"});
  p.sizes.sizes = rd.numbers(sizes, "model.sizes", "sizes");
  p.sizes.probs = rd.numbers(sizes, "model.sizes", "probs");
  const json* cost = rd.object(m, "model", "cost", true, {"eta", "phi", "v_max"});
  p.cost.eta = rd.number(cost, "model.cost", "eta");
  p.cost.phi = rd.number(cost, "model.cost", "phi");
  p.cost.v_max = rd.number(cost, "model.cost", "v_max", 5000.0);

  const json* grid = rd.object(doc, "", "grid", false, {"nodes"});
  cfg.grid_nodes = rd.integer<std::size_t>(grid, "grid", "nodes", 201, 3);

  const json* solver = rd.object(doc, "", "solver", false,
                                 {"n_steps", "tolerance", "max_iterations", "damping", "ramp_width"});
  cfg.solver.n_steps = rd.integer<int>(solver, "solver", "n_steps", 500, 1);
  cfg.solver.tolerance = rd.number(solver, "solver", "tolerance", 1e-10);
  cfg.solver.max_iterations = rd.integer<int>(solver, "solver", "max_iterations", 500, 1);
  cfg.solver.damping = rd.number(solver, "solver", "damping", 0.5);
  if (solver && solver->contains("ramp_width")) cfg.solver.ramp_width = rd.number(solver, "solver", "ramp_width");
  else rd.provenance.push_back("default solver.ramp_width = one grid step");

  const json* sim = rd.object(doc, "", "sim", false, {"n_paths", "dt_sim", "seed", "start_inventories"});
  cfg.sim.n_paths = rd.integer<std::size_t>(sim, "sim", "n_paths", 10000, 1);
  cfg.sim.dt_sim = rd.number(sim, "sim", "dt_sim", 1e-5);
  cfg.sim.seed = rd.integer<std::uint64_t>(sim, "sim", "seed", 1, 0);
  cfg.sim.start_inventories =
      rd.numbers(sim, "sim", "start_inventories", detail::default_start_inventories(p.q_max));

  if (const json* sweep = rd.object(doc, "", "sweep", false, {"parameter", "values"})) {
    Sweep sw;
    if (!sweep->contains("parameter") || !sweep->at("parameter").is_string()) {
      rd.errors.push_back("sweep.parameter: required string missing");
    } else {
      sw.parameter = sweep->at("parameter").get<std::string>();
      if (!sweep_parameters().count(sw.parameter))
        rd.errors.push_back("sweep.parameter: '" + sw.parameter +
                            "' is not one of phi, impact_k, gamma, lambda_scale, lambda_bid, lambda_ask");
    }
    sw.values = rd.numbers(sweep, "sweep", "values");
    if (sw.values.size() < 2 && sweep->contains("values"))
      rd.errors.push_back("sweep.values: at least two values are required");
    cfg.sweep = sw;
  }

  // Module invariants, only once every field was read successfully.
  if (rd.errors.empty()) {
    rd.check([&] { p.validate(); });
    if (!(cfg.solver.tolerance > 0.0)) rd.errors.push_back("solver.tolerance: must be > 0");
    if (!(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0))
      rd.errors.push_back("solver.damping: must lie in (0, 1]");
    if (cfg.solver.ramp_width && !(*cfg.solver.ramp_width > 0.0 && *cfg.solver.ramp_width < p.q_max))
      rd.errors.push_back("solver.ramp_width: must lie in (0, q_max)");
    if (!(cfg.sim.dt_sim > 0.0)) rd.errors.push_back("sim.dt_sim: must be > 0");
    if (rd.errors.empty()) {
      rd.check([&] {
        const InventoryGrid g(p.q_max, cfg.grid_nodes, p.sizes);
        for (double q0 : cfg.sim.start_inventories) {
          const std::size_t i = g.nearest(q0);
          if (std::abs(g[i] - q0) > 1e-9 * std::max(1.0, p.q_max))
            throw InvalidArgument("sim.start_inventories: " + std::to_string(q0) + " is not a grid node");
        }
        const double lambda = std::max(p.bid_curve.lambda_max, p.ask_curve.lambda_max);
        double share = 0.0;
        for (double x : p.sizes.probs) share = std::max(share, x);
        if (!(lambda * cfg.sim.dt_sim * share < 0.1))
          throw InvalidArgument("sim.dt_sim: lambda * dt_sim * max p must be < 0.1");
      });
      if (cfg.sweep) {
        for (double v : cfg.sweep->values)
          rd.check([&] { apply_sweep(p, cfg.sweep->parameter, v).validate(); });
      }
    }
  }

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  cfg.provenance = std::move(rd.provenance);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Fully materialized configuration (all defaults explicit), plus version
/// and provenance, as written next to every output.
inline nlohmann::json resolved_config(const RunConfig& cfg) {
  using nlohmann::json;
  const ModelParams& p = cfg.model;
  auto curve = [](const IntensityCurve& c) {
    return json{{"lambda_max", c.lambda_max}, {"alpha", c.alpha}, {"beta", c.beta}};
  };
  json out;
  out["artifact_version"] = kVersion;
  out["model"] = {{"sigma", p.sigma},
                  {"impact_k", p.impact_k},
                  {"gamma", p.gamma},
                  {"horizon_T", p.horizon_T},
                  {"q_max", p.q_max},
                  {"delta_floor", p.delta_floor},
                  {"bid_curve", curve(p.bid_curve)},
                  {"ask_curve", curve(p.ask_curve)},
                  {"sizes", {{"sizes", p.sizes.sizes}, {"probs", p.sizes.probs}}},
                  {"cost", {{"eta", p.cost.eta}, {"phi", p.cost.phi}, {"v_max", p.cost.v_max}}}};
  out["grid"] = {{"nodes", cfg.grid_nodes}};
  out["solver"] = {{"n_steps", cfg.solver.n_steps},
                   {"tolerance", cfg.solver.tolerance},
                   {"max_iterations", cfg.solver.max_iterations},
                   {"damping", cfg.solver.damping},
                   {"ramp_width", cfg.solver.ramp_width.value_or(2.0 * p.q_max /
                                                                 static_cast<double>(cfg.grid_nodes - 1))}};
  out["sim"] = {{"n_paths", cfg.sim.n_paths},
                {"dt_sim", cfg.sim.dt_sim},
                {"seed", cfg.sim.seed},
                {"start_inventories", cfg.sim.start_inventories}};
  if (cfg.sweep) out["sweep"] = {{"parameter", cfg.sweep->parameter}, {"values", cfg.sweep->values}};
  out["provenance"] = cfg.provenance;
  return out;
}

}  // namespace dmm
