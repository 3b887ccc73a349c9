#pragma once

// Monotone implicit Euler scheme for the market making Hamilton-Jacobi PIDE
//
//   0 = -d_t theta + psi(q) - sum_k p_k 1{q+z_k in Q} z_k H^b((theta(q) - theta(q+z_k)) / z_k)
//                           - sum_k p_k 1{q-z_k in Q} z_k H^a((theta(q) - theta(q-z_k)) / z_k)
//                           - Hexec(d_q theta, q),        theta(T, q) = -l(q),
//
// stepped backward on an inventory lattice. The execution Hamiltonian is
// upwinded: its buy part reads the forward difference and its sell part the
// backward difference, which keeps every term nonincreasing in theta(q) and
// nondecreasing in the neighbours.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dmm/error.hpp"
#include "dmm/grid.hpp"
#include "dmm/hamiltonians.hpp"
#include "dmm/model.hpp"

namespace dmm {

struct SolverOptions {
  int n_steps = 500;
  double tolerance = 1e-10;  // sup-norm residual of the implicit equation
  int max_iterations = 500;
  double damping = 0.5;
  std::optional<double> ramp_width;  // defaults to one grid step
};

struct StepDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  double damping = 0.0;  // damping actually used
};

/// theta(t, q) on the time x inventory lattice. Row i holds t = times[i].
class ValueSurface {
public:
  ValueSurface() = default;
  ValueSurface(std::vector<double> times, std::size_t nodes)
      : times_(std::move(times)), nodes_(nodes), values_(times_.size() * nodes, 0.0),
        diagnostics_(times_.empty() ? 0 : times_.size() - 1) {}

  std::size_t time_count() const noexcept { return times_.size(); }
  std::size_t node_count() const noexcept { return nodes_; }
  const std::vector<double>& times() const noexcept { return times_; }

  std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * nodes_, nodes_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * nodes_, nodes_};
  }
  double at(std::size_t time_index, std::size_t node) const noexcept {
    return values_[time_index * nodes_ + node];
  }

  /// Index of the lattice time closest to t.
  std::size_t time_index(double t) const noexcept {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    if (it == times_.end()) return times_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - times_.begin());
    return (t - times_[hi - 1] <= times_[hi] - t) ? hi - 1 : hi;
  }

  /// Diagnostics of the step that produced row i (i < time_count() - 1).
  std::vector<StepDiagnostics>& diagnostics() noexcept { return diagnostics_; }
  const std::vector<StepDiagnostics>& diagnostics() const noexcept { return diagnostics_; }

private:
  std::vector<double> times_;
  std::size_t nodes_ = 0;
  std::vector<double> values_;
  std::vector<StepDiagnostics> diagnostics_;
};

/// Ramp used by the scheme: explicit width or one grid step.
inline RampFunction scheme_ramp(const InventoryGrid& grid, const SolverOptions& options) {
  return RampFunction{options.ramp_width.value_or(grid.step())};
}

/// Forward and backward inventory differences of one value slice at node i.
/// At the lattice ends the missing side copies the existing one; the ramp
/// zeroes the corresponding part of the execution Hamiltonian there anyway.
struct UpwindDifferences {
  double forward = 0.0;
  double backward = 0.0;
};

inline UpwindDifferences upwind_differences(std::span<const double> theta, double step, std::size_t i) {
  const std::size_t n = theta.size();
  UpwindDifferences d;
  d.forward = i + 1 < n ? (theta[i + 1] - theta[i]) / step : (theta[i] - theta[i - 1]) / step;
  d.backward = i > 0 ? (theta[i] - theta[i - 1]) / step : d.forward;
  return d;
}

/// Evaluates the spatial operator F(theta) at every node, where the implicit
/// step reads theta_now = theta_next + dt F(theta_now). Holds warm-start
/// hints for the quote root finder, so one instance serves one solve.
class SchemeOperator {
public:
  SchemeOperator(const ModelParams& params, const InventoryGrid& grid, RampFunction ramp)
      : params_(params), grid_(grid), ramp_(ramp),
        buckets_(grid.buckets()),
        bid_hint_(grid.size() * buckets_, std::numeric_limits<double>::quiet_NaN()),
        ask_hint_(grid.size() * buckets_, std::numeric_limits<double>::quiet_NaN()) {
    psi_.reserve(grid.size());
    for (double q : grid.nodes()) psi_.push_back(running_penalty(params, q));
  }

  const RampFunction& ramp() const noexcept { return ramp_; }

  /// Upper bound on |dF_q / d theta_q|. The scheme depends on theta only
  /// through differences, so this also bounds the off-diagonal row sum.
  double diagonal_bound() const noexcept {
    double quotes = 0.0;
    for (std::size_t k = 0; k < buckets_; ++k)
      quotes += params_.sizes.probs[k] * (intensity_eval(params_.bid_curve, -params_.delta_floor) +
                                          intensity_eval(params_.ask_curve, -params_.delta_floor));
    return quotes + 2.0 * params_.cost.v_max / grid_.step();
  }

  double at(std::span<const double> theta, std::size_t i) {
    const std::size_t n = grid_.size();
    const double q = grid_[i];
    double f = -psi_[i];

    for (std::size_t k = 0; k < buckets_; ++k) {
      const std::size_t off = grid_.offset(k);
      const double z = params_.sizes.sizes[k];
      const double w = params_.sizes.probs[k] * z;
      if (i + off < n && params_.bid_curve.has_flow()) {
        double& hint = bid_hint_[i * buckets_ + k];
        const auto sol = quote_hamiltonian(params_.bid_curve, params_.delta_floor,
                                           (theta[i] - theta[i + off]) / z, hint);
        hint = sol.delta_star;
        f += w * sol.hamiltonian_value;
      }
      if (i >= off && params_.ask_curve.has_flow()) {
        double& hint = ask_hint_[i * buckets_ + k];
        const auto sol = quote_hamiltonian(params_.ask_curve, params_.delta_floor,
                                           (theta[i] - theta[i - off]) / z, hint);
        hint = sol.delta_star;
        f += w * sol.hamiltonian_value;
      }
    }

    const auto d = upwind_differences(theta, grid_.step(), i);
    f += upwind_exec_hamiltonian(params_.cost, ramp_, params_.q_max, params_.impact_k, d.forward,
                                 d.backward, q).value;
    return f;
  }

private:
  const ModelParams& params_;
  const InventoryGrid& grid_;
  RampFunction ramp_;
  std::size_t buckets_;
  std::vector<double> psi_;
  std::vector<double> bid_hint_;
  std::vector<double> ask_hint_;
};

/// One backward implicit step: returns theta_now solving
/// theta_now = theta_next + dt F(theta_now), by damped Picard iteration on
/// the nodewise update. The damping is reduced below `options.damping` when
/// needed to keep the iteration a sup-norm contraction.
///
/// Throws ConvergenceError (with `time_index`) when the residual stays above
/// `options.tolerance` after `options.max_iterations` sweeps.
inline std::vector<double> step_implicit(std::span<const double> theta_next, double dt,
                                         SchemeOperator& op, const SolverOptions& options,
                                         StepDiagnostics* diag = nullptr,
                                         std::size_t time_index = 0) {
  if (!(dt > 0.0)) throw InvalidArgument("step_implicit: dt must be > 0");
  for (double v : theta_next)
    if (!std::isfinite(v)) throw InvalidArgument("step_implicit: theta_next must be finite");

  const std::size_t n = theta_next.size();
  const double omega = std::min(options.damping, 1.0 / (1.0 + dt * op.diagonal_bound()));

  std::vector<double> theta(theta_next.begin(), theta_next.end());
  std::vector<double> mapped(n);
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it <= options.max_iterations; ++it) {
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mapped[i] = theta_next[i] + dt * op.at(theta, i);
      residual = std::max(residual, std::abs(mapped[i] - theta[i]));
    }
    if (residual < options.tolerance) break;
    if (it == options.max_iterations) break;
    for (std::size_t i = 0; i < n; ++i) theta[i] += omega * (mapped[i] - theta[i]);
  }
  if (diag) *diag = {it, residual, omega};
  if (!(residual < options.tolerance)) throw ConvergenceError(time_index, it, residual);
  return theta;
}

/// Convenience overload building a fresh operator.
inline std::vector<double> step_implicit(std::span<const double> theta_next, double dt,
                                         const ModelParams& params, const InventoryGrid& grid,
                                         const SolverOptions& options = {},
                                         StepDiagnostics* diag = nullptr) {
  SchemeOperator op(params, grid, scheme_ramp(grid, options));
  return step_implicit(theta_next, dt, op, options, diag);
}

/// Terminal data theta(T, q) = -l(q) on the lattice.
inline std::vector<double> terminal_values(const ModelParams& params, const InventoryGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double q : grid.nodes()) out.push_back(-terminal_penalty(params, q));
  return out;
}

/// Solves backward from arbitrary terminal data.
inline ValueSurface solve_from(const ModelParams& params, const InventoryGrid& grid,
                               std::span<const double> terminal, const SolverOptions& options = {}) {
  if (options.n_steps < 1) throw InvalidArgument("solve: n_steps must be >= 1");
  if (terminal.size() != grid.size())
    throw InvalidArgument("solve: terminal data does not match the grid");
  params.validate();

  const auto steps = static_cast<std::size_t>(options.n_steps);
  const double dt = params.horizon_T / static_cast<double>(steps);
  std::vector<double> times(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) times[i] = dt * static_cast<double>(i);
  times.back() = params.horizon_T;

  ValueSurface surface(std::move(times), grid.size());
  std::copy(terminal.begin(), terminal.end(), surface.row(steps).begin());

  SchemeOperator op(params, grid, scheme_ramp(grid, options));
  for (std::size_t i = steps; i-- > 0;) {
    auto next = surface.row(i + 1);
    auto now = step_implicit(next, dt, op, options, &surface.diagnostics()[i], i);
    std::copy(now.begin(), now.end(), surface.row(i).begin());
  }
  return surface;
}

/// Solves the PIDE backward from theta(T, q) = -l(q).
inline ValueSurface solve(const ModelParams& params, const InventoryGrid& grid,
                          const SolverOptions& options = {}) {
  const auto terminal = terminal_values(params, grid);
  return solve_from(params, grid, terminal, options);
}

}  // namespace dmm
