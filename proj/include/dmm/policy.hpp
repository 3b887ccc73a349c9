#pragma once

// Controls read off a solved value surface: size-dependent bid/ask quotes,
// the external execution rate, and the pure flow internalization area.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "dmm/error.hpp"
#include "dmm/grid.hpp"
#include "dmm/hamiltonians.hpp"
#include "dmm/model.hpp"
#include "dmm/solver.hpp"

namespace dmm {

/// Whether the control caps were active anywhere in a policy.
struct CapDiagnostics {
  std::size_t rate_cap_nodes = 0;     // nodes with |rate| == v_max
  std::size_t quote_floor_nodes = 0;  // (node, size) pairs with quote == -delta_floor
};

/// Optimal controls at one time slice, per inventory node.
///
/// Quotes are std::nullopt where the fill would leave the risk limits or
/// when the side has no flow (lambda_max = 0). `exec_rate` is the effective
/// gated drift; `buy_rate`/`sell_rate` are the ungated maximizers of the two
/// parts of the execution Hamiltonian, which the simulator gates again at
/// off-lattice inventories.
struct PolicyTable {
  double snapshot_time = 0.0;
  double q_max = 0.0;
  double step = 0.0;
  double ramp_width = 0.0;
  std::vector<double> sizes;
  std::vector<double> q;
  std::vector<double> theta;
  std::vector<std::vector<std::optional<double>>> bid;  // [node][bucket]
  std::vector<std::vector<std::optional<double>>> ask;  // [node][bucket]
  std::vector<double> exec_rate;
  std::vector<double> buy_rate;
  std::vector<double> sell_rate;
  CapDiagnostics caps;

  std::size_t size() const noexcept { return q.size(); }

  /// Index of the node closest to `inventory`, clamped to the lattice.
  std::size_t nearest(double inventory) const noexcept {
    const double pos = (inventory + q_max) / step;
    if (!(pos > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(std::lround(pos));
    return i >= q.size() ? q.size() - 1 : i;
  }
};

/// Reads the optimal controls at the lattice time closest to t.
inline PolicyTable extract_policy(const ValueSurface& surface, const ModelParams& params,
                                  const InventoryGrid& grid, double t,
                                  std::optional<double> ramp_width = std::nullopt) {
  if (!(t >= 0.0 && t < params.horizon_T))
    throw InvalidArgument("extract_policy: t must lie in [0, T)");
  if (surface.node_count() != grid.size())
    throw InvalidArgument("extract_policy: surface does not match the grid");

  const std::size_t ti = surface.time_index(t);
  const auto theta = surface.row(ti);
  const RampFunction ramp{ramp_width.value_or(grid.step())};
  const std::size_t n = grid.size();
  const std::size_t nb = grid.buckets();

  PolicyTable out;
  out.snapshot_time = surface.times()[ti];
  out.q_max = grid.q_max();
  out.step = grid.step();
  out.ramp_width = ramp.epsilon;
  out.sizes = params.sizes.sizes;
  out.q = grid.nodes();
  out.theta.assign(theta.begin(), theta.end());
  out.bid.assign(n, std::vector<std::optional<double>>(nb));
  out.ask.assign(n, std::vector<std::optional<double>>(nb));
  out.exec_rate.resize(n);
  out.buy_rate.resize(n);
  out.sell_rate.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t off = grid.offset(k);
      const double z = params.sizes.sizes[k];
      if (i + off < n && params.bid_curve.has_flow()) {
        const auto sol = quote_hamiltonian(params.bid_curve, params.delta_floor, (theta[i] - theta[i + off]) / z);
        out.bid[i][k] = sol.delta_star;
        out.caps.quote_floor_nodes += sol.floor_binds;
      }
      if (i >= off && params.ask_curve.has_flow()) {
        const auto sol = quote_hamiltonian(params.ask_curve, params.delta_floor, (theta[i] - theta[i - off]) / z);
        out.ask[i][k] = sol.delta_star;
        out.caps.quote_floor_nodes += sol.floor_binds;
      }
    }
    const auto d = upwind_differences(theta, grid.step(), i);
    const auto e = upwind_exec_hamiltonian(params.cost, ramp, params.q_max, params.impact_k, d.forward,
                                           d.backward, grid[i]);
    out.exec_rate[i] = e.gated_rate;
    out.buy_rate[i] = e.buy_rate;
    out.sell_rate[i] = e.sell_rate;
    if (std::abs(e.gated_rate) >= params.cost.v_max) ++out.caps.rate_cap_nodes;
  }
  return out;
}

/// Sup-norm distance between two policies on the same lattice: quotes in
/// bps, execution rates scaled by step / v_max.
inline double policy_distance(const PolicyTable& a, const PolicyTable& b, double v_max) {
  if (a.size() != b.size()) throw InvalidArgument("policy_distance: lattices differ");
  double gap = 0.0;
  auto quote_gap = [&gap](const auto& x, const auto& y) {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k] && y[k]) gap = std::max(gap, std::abs(*x[k] - *y[k]));
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    quote_gap(a.bid[i], b.bid[i]);
    quote_gap(a.ask[i], b.ask[i]);
    gap = std::max(gap, std::abs(a.exec_rate[i] - b.exec_rate[i]) * a.step / v_max);
  }
  return gap;
}

/// Distance between the controls at t = 0 and t = T/2.
inline double stationarity_gap(const ValueSurface& surface, const ModelParams& params,
                               const InventoryGrid& grid,
                               std::optional<double> ramp_width = std::nullopt) {
  const auto early = extract_policy(surface, params, grid, 0.0, ramp_width);
  const auto mid = extract_policy(surface, params, grid, 0.5 * params.horizon_T, ramp_width);
  return policy_distance(early, mid, params.cost.v_max);
}

/// Inventory interval where the optimal external execution rate vanishes.
/// When no node has a zero rate, the zone is empty and q_low == q_high marks
/// where the rate changes sign.
struct InternalizationZone {
  double q_low = 0.0;
  double q_high = 0.0;
  double width = 0.0;
  std::size_t node_count = 0;

  bool empty() const noexcept { return node_count == 0; }
  double midpoint() const noexcept { return 0.5 * (q_low + q_high); }
};

inline constexpr double kZeroRateTolerance = 1e-9;

inline InternalizationZone internalization_zone(const PolicyTable& policy) {
  const std::size_t n = policy.size();
  if (n == 0) return {};
  const auto& rate = policy.exec_rate;
  auto is_zero = [&](std::size_t i) { return std::abs(rate[i]) <= kZeroRateTolerance; };

  // First node where the (nonincreasing) rate stops being strictly positive.
  std::size_t c = 0;
  while (c < n && rate[c] > kZeroRateTolerance) ++c;

  InternalizationZone zone;
  if (c == n) {
    zone.q_low = zone.q_high = policy.q.back();
    return zone;
  }
  if (!is_zero(c)) {
    const double at = c == 0 ? policy.q.front() : 0.5 * (policy.q[c - 1] + policy.q[c]);
    zone.q_low = zone.q_high = at;
    return zone;
  }
  std::size_t e = c;
  while (e + 1 < n && is_zero(e + 1)) ++e;
  zone.q_low = policy.q[c];
  zone.q_high = policy.q[e];
  zone.width = zone.q_high - zone.q_low;
  zone.node_count = e - c + 1;
  return zone;
}

}  // namespace dmm
