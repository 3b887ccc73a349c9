#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "dmm/simulator.hpp"

using namespace dmm;
using dmm::test::base_solve;

namespace {

// Lattice policy with the same quote everywhere and a constant execution rate.
PolicyTable constant_policy(const ModelParams& p, std::size_t nodes, double quote, double rate) {
  const InventoryGrid g(p.q_max, nodes, p.sizes);
  PolicyTable pol;
  pol.q_max = p.q_max;
  pol.step = g.step();
  pol.ramp_width = g.step();
  pol.sizes = p.sizes.sizes;
  pol.q = g.nodes();
  const std::size_t n = g.size(), nb = g.buckets();
  pol.theta.assign(n, 0.0);
  pol.bid.assign(n, std::vector<std::optional<double>>(nb));
  pol.ask.assign(n, std::vector<std::optional<double>>(nb));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < nb; ++k) {
      if (i + g.offset(k) < n) pol.bid[i][k] = quote;
      if (i >= g.offset(k)) pol.ask[i][k] = quote;
    }
  pol.exec_rate.assign(n, rate);
  pol.buy_rate.assign(n, std::max(rate, 0.0));
  pol.sell_rate.assign(n, std::min(rate, 0.0));
  return pol;
}

SimConfig config(std::size_t paths, std::vector<double> starts, double dt = 1e-5) {
  SimConfig c;
  c.n_paths = paths;
  c.dt_sim = dt;
  c.seed = 7;
  c.start_inventories = std::move(starts);
  return c;
}

}  // namespace

TEST(Simulator, NullPolicyGivesZero) {
  ModelParams p = reference_params();
  p.gamma = 0.0;
  const auto pol = constant_policy(p, 201, p.delta_floor, 0.0);
  const auto stats = estimate_value(pol, p, config(200, {0.0}));
  EXPECT_EQ(stats.entries[0].mean_objective, 0.0);
  EXPECT_EQ(stats.entries[0].std_error, 0.0);
}

TEST(Simulator, ConstantRateClosedForm) {
  ModelParams p = reference_params();
  p.sigma = 0.0;
  p.bid_curve.lambda_max = 0.0;
  p.ask_curve.lambda_max = 0.0;
  const double v = 1000.0, T = p.horizon_T, k = p.impact_k;
  const auto pol = constant_policy(p, 201, 0.0, v);
  const auto r = simulate_path(pol, p, config(1, {0.0}), 0.0, 11);
  const double L = exec_cost_eval(p.cost, v);
  EXPECT_NEAR(r.state.q, v * T, 1e-9);
  EXPECT_NEAR(r.state.s, k * v * T, 1e-9);
  EXPECT_NEAR(r.state.x, -0.5 * k * v * v * T * T - L * T, 1e-9);
  EXPECT_NEAR(r.objective, -L * T, 1e-9);
  EXPECT_NEAR(r.reduced_objective, -L * T, 1e-9);
  EXPECT_NEAR(r.externalized_notional, v * T, 1e-9);
}

TEST(Simulator, PoissonFillMeans) {
  ModelParams p = reference_params();
  p.q_max = 1000.0;
  p.gamma = 0.0;
  const double quote = 0.1;
  const auto pol = constant_policy(p, 2001, quote, 0.0);
  const auto cfg = config(1, {0.0}, 1e-4);
  const std::size_t paths = 100000;
  const std::size_t nb = p.sizes.size();
  std::vector<double> sum(nb, 0.0), sq(nb, 0.0);
  double total = 0.0, total_sq = 0.0;
  for (std::size_t i = 0; i < paths; ++i) {
    const auto r = simulate_path(pol, p, cfg, 0.0, derive_path_seed(3, i));
    double all = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const double c = static_cast<double>(r.bid_fills[k]);
      sum[k] += c;
      sq[k] += c * c;
      all += c;
    }
    total += all;
    total_sq += all * all;
  }
  const double np = static_cast<double>(paths);
  const double lam = intensity_eval(p.bid_curve, quote);
  for (std::size_t k = 0; k < nb; ++k) {
    const double mean = sum[k] / np;
    const double se = std::sqrt((sq[k] / np - mean * mean) / (np - 1.0));
    EXPECT_NEAR(mean, p.horizon_T * p.sizes.probs[k] * lam, 4.0 * se) << "bucket " << k;
  }
  const double mean = total / np;
  const double se = std::sqrt((total_sq / np - mean * mean) / (np - 1.0));
  EXPECT_NEAR(mean, p.horizon_T * lam, 3.0 * se);
}

TEST(Simulator, InventoryStaysWithinLimits) {
  const auto& b = base_solve();
  const auto cfg = config(1, {100.0});
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (double q0 : {-100.0, -80.0, 0.0, 95.0, 100.0}) {
      const auto r = simulate_path(b.policy, b.params, cfg, q0, s);
      EXPECT_LE(std::abs(r.state.q), b.params.q_max);
      EXPECT_GE(r.internalized_notional, 0.0);
      EXPECT_GE(r.externalized_notional, 0.0);
    }
  }
}

TEST(Simulator, DeterministicAcrossRunsAndThreads) {
  const auto& b = base_solve();
  auto cfg = config(300, {-50.0, 0.0, 30.0});
  cfg.threads = 1;
  const auto a = estimate_paired(b.policy, b.params, cfg);
  cfg.threads = 4;
  const auto c = estimate_paired(b.policy, b.params, cfg);
  const auto d = estimate_paired(b.policy, b.params, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.full.entries[i].mean_objective, c.full.entries[i].mean_objective);
    EXPECT_EQ(a.full.entries[i].std_error, c.full.entries[i].std_error);
    EXPECT_EQ(a.reduced.entries[i].mean_objective, c.reduced.entries[i].mean_objective);
    EXPECT_EQ(c.full.entries[i].mean_objective, d.full.entries[i].mean_objective);
    EXPECT_EQ(a.full.entries[i].mean_internalized_notional, c.full.entries[i].mean_internalized_notional);
  }
}

TEST(Simulator, SigmaDoesNotMoveTheMean) {
  const auto& b = base_solve();
  ModelParams p = b.params;
  p.gamma = 0.0;
  const auto cfg = config(2000, {0.0, 40.0});
  const auto one = estimate_value(b.policy, p, cfg);
  p.sigma *= 2.0;
  const auto two = estimate_value(b.policy, p, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto &x = one.entries[i], &y = two.entries[i];
    EXPECT_LE(std::abs(x.mean_objective - y.mean_objective), 3.0 * std::hypot(x.std_error, y.std_error));
  }
}

TEST(Simulator, ReducedEstimatorIgnoresSigmaPathwise) {
  const auto& b = base_solve();
  ModelParams p = b.params;
  p.gamma = 0.0;
  const auto cfg = config(1, {0.0});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = simulate_path(b.policy, p, cfg, 10.0, s);
    ModelParams p2 = p;
    p2.sigma = 3.0 * p.sigma;
    const auto c = simulate_path(b.policy, p2, cfg, 10.0, s);
    EXPECT_EQ(a.reduced_objective, c.reduced_objective);
    EXPECT_EQ(a.state.q, c.state.q);
  }
}

TEST(Simulator, ZeroPolicyReducedValue) {
  ModelParams p = reference_params();
  const auto pol = constant_policy(p, 201, p.delta_floor, 0.0);
  const double q0 = 20.0;
  const auto s = estimate_value_reduced(pol, p, config(50, {q0}));
  const double expected = -terminal_penalty(p, q0) - p.horizon_T * running_penalty(p, q0);
  EXPECT_NEAR(s.entries[0].mean_objective, expected, 1e-9 * std::abs(expected));
}

TEST(Simulator, ReducedEstimatorHasSmallerError) {
  const auto& b = base_solve();
  ModelParams p = b.params;
  p.gamma = 0.0;
  const auto est = estimate_paired(b.policy, p, config(1000, {0.0, -60.0}));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(est.reduced.entries[i].std_error, est.full.entries[i].std_error);
}

TEST(Simulator, SinglePathSentinel) {
  const auto& b = base_solve();
  const auto s = estimate_value(b.policy, b.params, config(1, {0.0}));
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_TRUE(s.entries[0].single_sample);
  EXPECT_EQ(s.entries[0].std_error, 0.0);
  EXPECT_TRUE(std::isfinite(s.entries[0].mean_objective));
}

TEST(Simulator, ConfigValidation) {
  const auto& b = base_solve();
  EXPECT_THROW(estimate_value(b.policy, b.params, config(0, {0.0})), InvalidArgument);
  EXPECT_THROW(estimate_value(b.policy, b.params, config(10, {0.5})), InvalidArgument);
  EXPECT_THROW(estimate_value(b.policy, b.params, config(10, {0.0}, 2e-4)), InvalidArgument);
  EXPECT_THROW(estimate_value(b.policy, b.params, config(10, {0.0}, -1.0)), InvalidArgument);
}

TEST(Simulator, MissingQuoteIsReportedWithPath) {
  ModelParams p = reference_params();
  auto pol = constant_policy(p, 201, 0.1, 0.0);
  for (auto& row : pol.bid) row[0].reset();
  try {
    estimate_value(pol, p, config(4, {0.0}));
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.path_index(), 0u);
  }
}

TEST(Simulator, PathSeedsAreDistinct) {
  EXPECT_NE(derive_path_seed(1, 0), derive_path_seed(1, 1));
  EXPECT_NE(derive_path_seed(1, 0), derive_path_seed(2, 0));
  EXPECT_EQ(derive_path_seed(5, 9), derive_path_seed(5, 9));
}
