#pragma once

// Quote and execution Hamiltonians together with their maximizers.
//
//   H(p)      = sup_{delta >= -delta_floor} Lambda(delta) (delta - p)
//   Hbar(r)   = sup_{|v| <= v_max} r v - L(v)
//   Hexec(p,q)= zeta(qmax - q) Hbar((p + k q)_+) + zeta(qmax + q) Hbar(-(p + k q)_-)

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmm/error.hpp"
#include "dmm/model.hpp"

namespace dmm {

struct QuoteSolution {
  double delta_star = 0.0;         // bps
  double hamiltonian_value = 0.0;  // bps
  bool floor_binds = false;
};

namespace detail {

// First-order condition of delta -> Lambda(delta)(delta - p) for the logistic
// family, rescaled so that it is strictly increasing and concave in delta:
//   f(delta) = delta - p - (1 + exp(-alpha - beta delta)) / beta.
// The objective increases where f < 0 and decreases where f > 0.
struct LogisticFoc {
  double alpha, beta, p;

  double value(double delta) const {
    return delta - p - (1.0 + std::exp(-alpha - beta * delta)) / beta;
  }
  double slope(double delta) const { return 1.0 + std::exp(-alpha - beta * delta); }
};

inline constexpr double kFocTolerance = 1e-12;

}  // namespace detail

/// Maximizer and value of Lambda(delta)(delta - p) over delta >= -delta_floor.
///
/// The interior optimum is the unique root of the first-order condition,
/// found by Newton steps safeguarded by an analytic bracket with bisection
/// fallback. `hint` is an optional starting point (e.g. the previous
/// solution at a nearby p); it only affects the iteration count.
inline QuoteSolution quote_hamiltonian(const IntensityCurve& curve, double delta_floor, double p,
                                       double hint = std::numeric_limits<double>::quiet_NaN()) {
  if (!std::isfinite(p)) throw InvalidArgument("quote_hamiltonian: p must be finite");
  const detail::LogisticFoc foc{curve.alpha, curve.beta, p};

  const double lo0 = -delta_floor;
  QuoteSolution out;
  if (foc.value(lo0) >= 0.0) {
    out.delta_star = lo0;
    out.floor_binds = true;
    out.hamiltonian_value = intensity_eval(curve, lo0) * (lo0 - p);
    return out;
  }

  // Bracket [lo, hi] with f(lo) < 0 <= f(hi). Since exp(-u) decreases in
  // delta, f(x + (1 + exp(-alpha - beta x)) / beta) >= 0 for any x >= p.
  double lo = lo0;
  const double base = std::max(lo0, p);
  double hi = base + (1.0 + std::exp(-curve.alpha - curve.beta * base)) / curve.beta;
  if (!std::isfinite(hi)) {
    // exp overflow for extremely negative p; grow geometrically instead.
    double step = 1.0 / curve.beta;
    hi = base + step;
    while (foc.value(hi) < 0.0) {
      lo = hi;
      step *= 2.0;
      hi = base + step;
    }
  }

  double x = (std::isfinite(hint) && hint > lo && hint < hi) ? hint : hi;
  for (int it = 0; it < 200; ++it) {
    const double f = foc.value(x);
    if (std::abs(f) < detail::kFocTolerance) break;
    if (f < 0.0) lo = std::max(lo, x);
    else hi = std::min(hi, x);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x))) break;
    double next = x - f / foc.slope(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }

  out.delta_star = x;
  out.hamiltonian_value = intensity_eval(curve, x) * (x - p);
  return out;
}

/// Piecewise-linear Lipschitz surrogate of the indicator of [0, inf):
/// 0 below 0, 1 above epsilon, linear in between (Lipschitz constant 1/epsilon).
struct RampFunction {
  double epsilon = 1.0;

  double operator()(double x) const noexcept {
    if (x <= 0.0) return 0.0;
    if (x >= epsilon) return 1.0;
    return x / epsilon;
  }
};

struct BarSolution {
  double value = 0.0;   // bps.M$/day
  double v_star = 0.0;  // M$/day
};

/// Convex conjugate of L(v) = eta v^2 + phi |v| restricted to |v| <= v_max.
inline BarSolution bar_hamiltonian(const ExecutionCost& cost, double r) noexcept {
  const double excess = std::abs(r) - cost.phi;
  if (!(excess > 0.0)) return {};
  const double v = std::min(excess / (2.0 * cost.eta), cost.v_max);
  const double v_signed = r > 0.0 ? v : -v;
  return {r * v_signed - exec_cost_unchecked(cost, v_signed), v_signed};
}

/// Execution Hamiltonian with separate marginal values for the buy part
/// (forward difference) and the sell part (backward difference). This is the
/// Godunov-upwind form used by the finite-difference scheme; the rates are
/// the ungated maximizers of each part.
struct UpwindExecSolution {
  double value = 0.0;
  double buy_rate = 0.0;   // >= 0, before ramp gating
  double sell_rate = 0.0;  // <= 0, before ramp gating
  double gated_rate = 0.0; // effective drift of the inventory
};

inline UpwindExecSolution upwind_exec_hamiltonian(const ExecutionCost& cost, const RampFunction& ramp,
                                                  double q_max, double impact_k, double p_forward,
                                                  double p_backward, double q) noexcept {
  const double buy_gate = ramp(q_max - q);
  const double sell_gate = ramp(q_max + q);
  const BarSolution buy = bar_hamiltonian(cost, std::max(p_forward + impact_k * q, 0.0));
  const BarSolution sell = bar_hamiltonian(cost, std::min(p_backward + impact_k * q, 0.0));
  UpwindExecSolution out;
  out.value = buy_gate * buy.value + sell_gate * sell.value;
  out.buy_rate = buy.v_star;
  out.sell_rate = sell.v_star;
  out.gated_rate = buy_gate * buy.v_star + sell_gate * sell.v_star;
  return out;
}

struct ExecSolution {
  double value = 0.0;
  double v_star = 0.0;  // Hbar'(p + k q), before gating
  double drift = 0.0;   // -(v*)_- zeta(qmax + q) + (v*)_+ zeta(qmax - q)
};

/// Hexec(p, q) for a single marginal value p; adds the impact shift k q.
inline ExecSolution exec_hamiltonian(const ExecutionCost& cost, const RampFunction& ramp, double q_max,
                                     double impact_k, double p, double q) {
  if (!(q >= -q_max && q <= q_max))
    throw InvalidArgument("exec_hamiltonian: q outside [-q_max, q_max]");
  const auto up = upwind_exec_hamiltonian(cost, ramp, q_max, impact_k, p, p, q);
  ExecSolution out;
  out.value = up.value;
  out.v_star = bar_hamiltonian(cost, p + impact_k * q).v_star;
  out.drift = up.gated_rate;
  return out;
}

}  // namespace dmm
