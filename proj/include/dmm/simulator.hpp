#pragma once

// Monte Carlo replay of the market making dynamics under a fixed policy.
//
// Fixed-step scheme: within each step of length dt at most one client fill
// (bucket k at the bid with probability p_k Lambda^b(delta^b) dt, same at the
// ask) is drawn, then inventory, reference price, cash and the running
// penalty are advanced continuously under the external execution rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dmm/error.hpp"
#include "dmm/hamiltonians.hpp"
#include "dmm/model.hpp"
#include "dmm/policy.hpp"

namespace dmm {

struct SimConfig {
  std::size_t n_paths = 10000;
  double dt_sim = 1e-5;  // day
  std::uint64_t seed = 1;
  std::vector<double> start_inventories;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate(const ModelParams& params, const PolicyTable& policy) const {
    if (n_paths < 1) throw InvalidArgument("SimConfig: n_paths must be >= 1");
    if (!(dt_sim > 0.0) || !std::isfinite(dt_sim))
      throw InvalidArgument("SimConfig: dt_sim must be finite and > 0");
    if (dt_sim > params.horizon_T) throw InvalidArgument("SimConfig: dt_sim exceeds the horizon");
    const double lambda = std::max(params.bid_curve.lambda_max, params.ask_curve.lambda_max);
    const double share = *std::max_element(params.sizes.probs.begin(), params.sizes.probs.end());
    if (!(lambda * dt_sim * share < 0.1))
      throw InvalidArgument("SimConfig: dt_sim too large for the fill intensity (lambda * dt * max p >= 0.1)");
    for (double q0 : start_inventories) {
      const std::size_t i = policy.nearest(q0);
      if (std::abs(policy.q[i] - q0) > 1e-9 * std::max(1.0, policy.q_max))
        throw InvalidArgument("SimConfig: start inventory " + std::to_string(q0) + " is not a policy node");
    }
  }
};

struct PathState {
  double t = 0.0;
  double q = 0.0;            // M$
  double x = 0.0;            // cash, bps.M$ (relative to S0)
  double s = 0.0;            // reference price offset from S0, bps
  double accrued_psi = 0.0;  // integral of psi(q) dt
};

struct PathResult {
  PathState state;
  double objective = 0.0;          // x_T + q_T s_T - l(q_T) - int psi
  double reduced_objective = 0.0;  // post-Ito integrand, no price path
  std::vector<std::size_t> bid_fills;  // per bucket
  std::vector<std::size_t> ask_fills;  // per bucket
  double internalized_notional = 0.0;  // sum of client fill sizes
  double externalized_notional = 0.0;  // integral of |w| dt
};

struct SimStats {
  struct Entry {
    double q0 = 0.0;
    std::size_t n_paths = 0;
    double mean_objective = 0.0;
    /// Standard error of the mean. A single sample carries no spread
    /// information; it is reported as 0 with `single_sample` set.
    double std_error = 0.0;
    bool single_sample = false;
    double mean_internalized_notional = 0.0;
    double mean_externalized_notional = 0.0;
  };
  std::vector<Entry> entries;
};

/// Seed of path `index` derived from the run seed (splitmix64 finalizer).
inline std::uint64_t derive_path_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

// Per-node fill rates p_k Lambda(delta(q, z_k)); negative marks a missing quote.
struct FillRates {
  std::size_t buckets = 0;
  std::vector<double> bid;  // [node * buckets + k]
  std::vector<double> ask;

  FillRates(const PolicyTable& policy, const ModelParams& params) : buckets(policy.sizes.size()) {
    bid.assign(policy.size() * buckets, -1.0);
    ask.assign(policy.size() * buckets, -1.0);
    for (std::size_t i = 0; i < policy.size(); ++i)
      for (std::size_t k = 0; k < buckets; ++k) {
        const double pk = params.sizes.probs[k];
        if (!params.bid_curve.has_flow()) bid[i * buckets + k] = 0.0;
        else if (policy.bid[i][k]) bid[i * buckets + k] = pk * intensity_eval(params.bid_curve, *policy.bid[i][k]);
        if (!params.ask_curve.has_flow()) ask[i * buckets + k] = 0.0;
        else if (policy.ask[i][k]) ask[i * buckets + k] = pk * intensity_eval(params.ask_curve, *policy.ask[i][k]);
      }
  }
};

// Neumaier-compensated sum, evaluated in index order.
inline double compensated_sum(const std::vector<double>& xs) noexcept {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

inline PathResult run_path(const PolicyTable& policy, const ModelParams& params, const FillRates& rates,
                           double dt, std::size_t steps, double q0, std::uint64_t path_seed) {
  std::mt19937_64 rng(path_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t nb = rates.buckets;
  const double qmax = params.q_max;
  const double bound_tol = 1e-9 * std::max(1.0, qmax);
  const RampFunction ramp{policy.ramp_width};
  const double vol_step = params.sigma * std::sqrt(dt);
  const double psi_coef = 0.5 * params.gamma * params.sigma * params.sigma;
  const auto& sizes = params.sizes.sizes;

  PathResult r;
  r.bid_fills.assign(nb, 0);
  r.ask_fills.assign(nb, 0);
  PathState& st = r.state;
  st.q = q0;
  double reduced = 0.0;

  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t node = policy.nearest(st.q);

    // (i)-(iii) at most one client fill
    double total = 0.0;
    double event_rate[32];
    const std::size_t events = 2 * nb;
    for (std::size_t k = 0; k < nb; ++k) {
      double rb = rates.bid[node * nb + k];
      double ra = rates.ask[node * nb + k];
      const bool bid_ok = st.q + sizes[k] <= qmax + bound_tol;
      const bool ask_ok = st.q - sizes[k] >= -qmax - bound_tol;
      if ((bid_ok && rb < 0.0) || (ask_ok && ra < 0.0))
        throw InvalidArgument("policy has no quote at a reachable node");
      event_rate[k] = bid_ok ? rb : 0.0;
      event_rate[nb + k] = ask_ok ? ra : 0.0;
      total += event_rate[k] + event_rate[nb + k];
    }
    const double u = uniform(rng);
    if (u < total * dt) {
      const double target = u / dt;
      double acc = 0.0;
      std::size_t e = 0;
      for (; e + 1 < events; ++e) {
        acc += event_rate[e];
        if (target < acc) break;
      }
      while (event_rate[e] == 0.0 && e > 0) --e;  // guard against rounding past the last live event
      if (e < nb) {
        const double z = sizes[e];
        const double delta = *policy.bid[node][e];
        st.x -= z * (st.s - delta);
        st.q += z;
        reduced += z * delta;
        ++r.bid_fills[e];
        r.internalized_notional += z;
      } else {
        const std::size_t k = e - nb;
        const double z = sizes[k];
        const double delta = *policy.ask[node][k];
        st.x += z * (st.s + delta);
        st.q -= z;
        reduced += z * delta;
        ++r.ask_fills[k];
        r.internalized_notional += z;
      }
    }

    // (iv) continuous part under the (re-gated) execution rate
    const std::size_t cnode = policy.nearest(st.q);
    const double buy_gate = ramp(qmax - st.q);
    const double sell_gate = ramp(qmax + st.q);
    const double vb = policy.buy_rate[cnode];
    const double vs = policy.sell_rate[cnode];
    const double w = buy_gate * vb + sell_gate * vs;
    const double cost = buy_gate * exec_cost_unchecked(params.cost, vb) +
                        sell_gate * exec_cost_unchecked(params.cost, vs);
    double q1 = st.q + w * dt;
    if (q1 > qmax + bound_tol || q1 < -qmax - bound_tol)
      throw InvalidArgument("inventory left the risk limits");
    q1 = std::clamp(q1, -qmax, qmax);

    const double noise = normal(rng);
    st.accrued_psi += psi_coef * dt * (st.q * st.q + st.q * q1 + q1 * q1) / 3.0;
    reduced += params.impact_k * w * dt * 0.5 * (st.q + q1) - cost * dt;
    st.x -= (w * (st.s + 0.5 * params.impact_k * w * dt) + cost) * dt;
    st.s += params.impact_k * w * dt + vol_step * noise;
    st.q = q1;
    r.externalized_notional += std::abs(w) * dt;
  }

  st.t = dt * static_cast<double>(steps);
  const double terminal = terminal_penalty(params, st.q);
  r.objective = st.x + st.q * st.s - terminal - st.accrued_psi;
  r.reduced_objective = reduced - terminal - st.accrued_psi;
  return r;
}

inline std::size_t step_count(const ModelParams& params, const SimConfig& config) {
  return static_cast<std::size_t>(std::llround(params.horizon_T / config.dt_sim));
}

}  // namespace detail

/// Replays one path from inventory q0 with its own RNG seed.
inline PathResult simulate_path(const PolicyTable& policy, const ModelParams& params, const SimConfig& config,
                                double q0, std::uint64_t path_seed) {
  const detail::FillRates rates(policy, params);
  if (rates.buckets > 16) throw InvalidArgument("simulate_path: at most 16 size buckets are supported");
  try {
    return detail::run_path(policy, params, rates, config.dt_sim, detail::step_count(params, config), q0,
                            path_seed);
  } catch (const InvalidArgument& e) {
    throw SimulationError(0, e.what());
  }
}

/// Paired full and reduced estimates from the same simulated paths.
struct PairedEstimate {
  SimStats full;
  SimStats reduced;
};

inline PairedEstimate estimate_paired(const PolicyTable& policy, const ModelParams& params,
                                      const SimConfig& config) {
  config.validate(params, policy);
  const detail::FillRates rates(policy, params);
  if (rates.buckets > 16) throw InvalidArgument("estimate: at most 16 size buckets are supported");
  const std::size_t steps = detail::step_count(params, config);
  const std::size_t n = config.n_paths;

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  PairedEstimate out;
  for (double q0 : config.start_inventories) {
    std::vector<double> full(n), reduced(n), internal(n), external(n);
    std::vector<std::size_t> failed_path(threads, std::numeric_limits<std::size_t>::max());
    std::vector<std::string> failure(threads);

    auto work = [&](unsigned tid) {
      const std::size_t begin = n * tid / threads, end = n * (tid + 1) / threads;
      for (std::size_t p = begin; p < end; ++p) {
        try {
          const auto r = detail::run_path(policy, params, rates, config.dt_sim, steps, q0,
                                          derive_path_seed(config.seed, p));
          full[p] = r.objective;
          reduced[p] = r.reduced_objective;
          internal[p] = r.internalized_notional;
          external[p] = r.externalized_notional;
        } catch (const std::exception& e) {
          failed_path[tid] = p;
          failure[tid] = e.what();
          return;
        }
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (unsigned t = 0; t < threads; ++t)
      if (failed_path[t] != std::numeric_limits<std::size_t>::max())
        throw SimulationError(failed_path[t], failure[t]);

    auto summarize = [&](const std::vector<double>& xs) {
      SimStats::Entry e;
      e.q0 = q0;
      e.n_paths = n;
      const double nn = static_cast<double>(n);
      e.mean_objective = detail::compensated_sum(xs) / nn;
      if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - e.mean_objective) * (xs[i] - e.mean_objective);
        e.std_error = std::sqrt(detail::compensated_sum(sq) / (nn - 1.0) / nn);
      } else {
        e.single_sample = true;
      }
      e.mean_internalized_notional = detail::compensated_sum(internal) / nn;
      e.mean_externalized_notional = detail::compensated_sum(external) / nn;
      return e;
    };
    out.full.entries.push_back(summarize(full));
    out.reduced.entries.push_back(summarize(reduced));
  }
  return out;
}

/// Mean and standard error of x_T + q_T S_T - l(q_T) - int psi per start inventory.
inline SimStats estimate_value(const PolicyTable& policy, const ModelParams& params, const SimConfig& config) {
  return estimate_paired(policy, params, config).full;
}

/// Same paths, accumulating the post-Ito integrand (quote revenue, k q w,
/// execution cost, running penalty) instead of tracking the price.
inline SimStats estimate_value_reduced(const PolicyTable& policy, const ModelParams& params,
                                       const SimConfig& config) {
  return estimate_paired(policy, params, config).reduced;
}

}  // namespace dmm
