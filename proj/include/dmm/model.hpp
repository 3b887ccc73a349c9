#pragma once

// Model parameters and primitive functions of the dealer market making model.
//
// Units throughout: prices and quote offsets in bps of the initial price,
// inventory and trade sizes in M$, time in days.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "dmm/error.hpp"

namespace dmm {

/// Logistic fill intensity Lambda(delta) = lambda_max / (1 + exp(alpha + beta * delta)).
///
/// lambda_max = 0 is accepted and denotes a side with no client flow.
struct IntensityCurve {
  double lambda_max = 0.0;  // trades/day
  double alpha = 0.0;
  double beta = 1.0;        // 1/bps

  void validate(const std::string& name = "intensity curve") const {
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max))
      throw InvalidArgument(name + ": lambda_max must be finite and >= 0");
    if (!std::isfinite(alpha))
      throw InvalidArgument(name + ": alpha must be finite");
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw InvalidArgument(name + ": beta must be finite and > 0");
  }

  bool has_flow() const noexcept { return lambda_max > 0.0; }
};

/// Lambda(delta). Evaluated as lambda_max * sigmoid(-(alpha + beta delta)) so
/// that large |delta| neither overflows nor loses the tail.
inline double intensity_eval(const IntensityCurve& curve, double delta) {
  const double u = curve.alpha + curve.beta * delta;
  if (u > 0.0) {
    const double e = std::exp(-u);
    return curve.lambda_max * e / (1.0 + e);
  }
  return curve.lambda_max / (1.0 + std::exp(u));
}

/// First derivative of the logistic intensity.
inline double intensity_derivative(const IntensityCurve& curve, double delta) {
  const double s = intensity_eval(curve, delta) / (curve.lambda_max > 0 ? curve.lambda_max : 1.0);
  // d/dd [lambda * s(-u)] = -lambda * beta * s (1 - s)
  return -curve.lambda_max * curve.beta * s * (1.0 - s);
}

/// Second derivative of the logistic intensity.
inline double intensity_second_derivative(const IntensityCurve& curve, double delta) {
  const double s = intensity_eval(curve, delta) / (curve.lambda_max > 0 ? curve.lambda_max : 1.0);
  return curve.lambda_max * curve.beta * curve.beta * s * (1.0 - s) * (1.0 - 2.0 * s);
}

/// Discrete distribution of client trade sizes.
struct SizeGrid {
  std::vector<double> sizes;  // M$, strictly increasing, > 0
  std::vector<double> probs;  // sum to 1

  void validate() const {
    if (sizes.empty())
      throw InvalidArgument("SizeGrid: at least one size bucket is required");
    if (sizes.size() != probs.size())
      throw InvalidArgument("SizeGrid: sizes and probs must have the same length");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (!(sizes[i] > 0.0) || !std::isfinite(sizes[i]))
        throw InvalidArgument("SizeGrid: sizes must be finite and > 0");
      if (i > 0 && !(sizes[i] > sizes[i - 1]))
        throw InvalidArgument("SizeGrid: sizes must be strictly increasing");
      if (!(probs[i] >= 0.0) || !std::isfinite(probs[i]))
        throw InvalidArgument("SizeGrid: probs must be finite and >= 0");
    }
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12)
      throw InvalidArgument("SizeGrid: probs must sum to 1 (got " + std::to_string(total) + ")");
  }

  std::size_t size() const noexcept { return sizes.size(); }
};

/// Expected trade size sum_k z_k p_k.
inline double mean_size(const SizeGrid& grid) {
  double m = 0.0;
  for (std::size_t i = 0; i < grid.sizes.size(); ++i) m += grid.sizes[i] * grid.probs[i];
  return m;
}

/// Execution cost L(v) = eta v^2 + phi |v| with rate cap |v| <= v_max.
struct ExecutionCost {
  double eta = 1e-5;     // bps.day/M$
  double phi = 0.0;      // bps
  double v_max = 5000.0; // M$/day

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta))
      throw InvalidArgument("ExecutionCost: eta must be finite and > 0");
    if (!(phi >= 0.0) || !std::isfinite(phi))
      throw InvalidArgument("ExecutionCost: phi must be finite and >= 0");
    if (!(v_max > 0.0) || !std::isfinite(v_max))
      throw InvalidArgument("ExecutionCost: v_max must be finite and > 0");
  }
};

/// L(v) without the rate-cap check; used on already-capped rates.
inline double exec_cost_unchecked(const ExecutionCost& cost, double v) noexcept {
  return cost.eta * v * v + cost.phi * std::abs(v);
}

/// L(v). Throws InvalidArgument when |v| exceeds the rate cap.
inline double exec_cost_eval(const ExecutionCost& cost, double v) {
  if (!(std::abs(v) <= cost.v_max))
    throw InvalidArgument("exec_cost_eval: |v| exceeds v_max");
  return exec_cost_unchecked(cost, v);
}

struct ModelParams {
  double sigma = 50.0;        // bps/sqrt(day)
  double impact_k = 0.0;      // bps/M$
  double gamma = 0.0;         // 1/(bps.M$)
  double horizon_T = 0.05;    // day
  double q_max = 100.0;       // M$
  double delta_floor = 10.0;  // bps
  IntensityCurve bid_curve;
  IntensityCurve ask_curve;
  SizeGrid sizes;
  ExecutionCost cost;

  void validate() const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0.0) || !std::isfinite(x))
        throw InvalidArgument(std::string("ModelParams: ") + name + " must be finite and > 0");
    };
    auto nonneg = [](double x, const char* name) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw InvalidArgument(std::string("ModelParams: ") + name + " must be finite and >= 0");
    };
    positive(sigma, "sigma");
    nonneg(impact_k, "impact_k");
    nonneg(gamma, "gamma");
    positive(horizon_T, "horizon_T");
    positive(q_max, "q_max");
    positive(delta_floor, "delta_floor");
    bid_curve.validate("bid_curve");
    ask_curve.validate("ask_curve");
    sizes.validate();
    cost.validate();
  }
};

/// Running inventory penalty psi(q) = gamma/2 sigma^2 q^2.
inline double running_penalty(const ModelParams& params, double q) noexcept {
  return 0.5 * params.gamma * params.sigma * params.sigma * q * q;
}

/// Terminal liquidation penalty l(q) = k/2 q^2. The terminal value is -l(q).
inline double terminal_penalty(const ModelParams& params, double q) noexcept {
  return 0.5 * params.impact_k * q * q;
}

/// Parameter set of the USDCNH example: 4 size buckets, symmetric logistic
/// intensities, quadratic-plus-proportional execution cost.
inline ModelParams reference_params() {
  ModelParams p;
  p.sigma = 50.0;
  p.impact_k = 0.005;
  p.gamma = 0.0005;
  p.horizon_T = 0.05;
  p.q_max = 100.0;
  p.delta_floor = 10.0;
  p.bid_curve = {1000.0, -1.0, 10.0};
  p.ask_curve = {1000.0, -1.0, 10.0};
  p.sizes = {{1.0, 5.0, 10.0, 20.0}, {0.76, 0.15, 0.075, 0.015}};
  p.cost = {1e-5, 0.1, 5000.0};
  return p;
}

}  // namespace dmm
