#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "dmm/policy.hpp"

using namespace dmm;
using dmm::test::base_solve;

namespace {

ModelParams flat_params() {
  ModelParams p = reference_params();
  p.bid_curve.lambda_max = 0.0;
  p.ask_curve.lambda_max = 0.0;
  p.gamma = 0.0;
  p.impact_k = 0.0;
  return p;
}

}  // namespace

TEST(Policy, ReferenceSpreadAtZero) {
  const auto& pol = base_solve().policy;
  const std::size_t mid = pol.nearest(0.0);
  EXPECT_NEAR(*pol.bid[mid][0] + *pol.ask[mid][0], 0.32, 0.03);
}

TEST(Policy, Invariants) {
  const auto& b = base_solve();
  const auto& pol = b.policy;
  const std::size_t n = pol.size();
  EXPECT_EQ(pol.snapshot_time, 0.0);
  EXPECT_EQ(pol.ramp_width, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_LE(std::abs(pol.exec_rate[i]), b.params.cost.v_max);
    for (std::size_t k = 0; k < pol.sizes.size(); ++k) {
      const auto off = b.grid.offset(k);
      EXPECT_EQ(pol.bid[i][k].has_value(), i + off < n);
      EXPECT_EQ(pol.ask[i][k].has_value(), i >= off);
      if (pol.bid[i][k]) { EXPECT_GE(*pol.bid[i][k], -b.params.delta_floor); }
      if (pol.ask[i][k]) { EXPECT_GE(*pol.ask[i][k], -b.params.delta_floor); }
    }
  }
  EXPECT_LE(pol.exec_rate.back(), 0.0);
  EXPECT_GE(pol.exec_rate.front(), 0.0);
}

TEST(Policy, SymmetricUnderSymmetricParameters) {
  const auto& pol = base_solve().policy;
  const std::size_t n = pol.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(pol.exec_rate[i], -pol.exec_rate[n - 1 - i], 1e-6);
    for (std::size_t k = 0; k < pol.sizes.size(); ++k) {
      ASSERT_EQ(pol.bid[i][k].has_value(), pol.ask[n - 1 - i][k].has_value());
      if (pol.bid[i][k]) { EXPECT_NEAR(*pol.bid[i][k], *pol.ask[n - 1 - i][k], 1e-9); }
    }
  }
}

TEST(Policy, QuotesMonotoneInInventory) {
  const auto& pol = base_solve().policy;
  for (std::size_t k = 0; k < pol.sizes.size(); ++k)
    for (std::size_t i = 0; i + 1 < pol.size(); ++i) {
      if (pol.bid[i][k] && pol.bid[i + 1][k]) { EXPECT_LE(*pol.bid[i][k], *pol.bid[i + 1][k] + 1e-12); }
      if (pol.ask[i][k] && pol.ask[i + 1][k]) { EXPECT_GE(*pol.ask[i][k] + 1e-12, *pol.ask[i + 1][k]); }
    }
}

TEST(Policy, ExecRateNonincreasing) {
  const auto& pol = base_solve().policy;
  for (std::size_t i = 0; i + 1 < pol.size(); ++i) EXPECT_GE(pol.exec_rate[i] + 1e-9, pol.exec_rate[i + 1]);
}

TEST(Policy, RateCapDiagnostics) {
  const auto& pol = base_solve().policy;
  std::size_t capped = 0;
  for (double v : pol.exec_rate) capped += std::abs(v) >= 5000.0;
  EXPECT_EQ(pol.caps.rate_cap_nodes, capped);
  EXPECT_EQ(pol.caps.quote_floor_nodes, 0u);
}

TEST(Policy, RejectsTimesOutsideHorizon) {
  const auto& b = base_solve();
  EXPECT_THROW(extract_policy(b.surface, b.params, b.grid, b.params.horizon_T), InvalidArgument);
  EXPECT_THROW(extract_policy(b.surface, b.params, b.grid, -0.01), InvalidArgument);
}

TEST(Policy, NoFlowSideHasNoQuotes) {
  ModelParams p = reference_params();
  p.ask_curve.lambda_max = 0.0;
  const InventoryGrid g(p.q_max, 201, p.sizes);
  SolverOptions o;
  o.n_steps = 50;
  const auto pol = extract_policy(solve(p, g, o), p, g, 0.0);
  for (std::size_t i = 0; i < pol.size(); ++i)
    for (std::size_t k = 0; k < pol.sizes.size(); ++k) EXPECT_FALSE(pol.ask[i][k].has_value());
  EXPECT_TRUE(pol.bid[100][0].has_value());
}

TEST(Stationarity, ZeroWithoutDynamics) {
  const ModelParams p = flat_params();
  const InventoryGrid g(p.q_max, 201, p.sizes);
  const auto s = solve(p, g);
  EXPECT_EQ(stationarity_gap(s, p, g), 0.0);
}

TEST(Stationarity, LongerHorizonDoesNotIncreaseGap) {
  const auto& b = base_solve();
  const double base_gap = stationarity_gap(b.surface, b.params, b.grid);
  ModelParams p = b.params;
  p.horizon_T *= 10.0;
  SolverOptions o;
  o.n_steps = 5000;
  const double long_gap = stationarity_gap(solve(p, b.grid, o), p, b.grid);
  EXPECT_LE(long_gap, base_gap);
}

TEST(Stationarity, DistanceOfIdenticalPoliciesIsZero) {
  const auto& pol = base_solve().policy;
  EXPECT_EQ(policy_distance(pol, pol, 5000.0), 0.0);
}

TEST(Internalization, ReferenceZoneContainsZero) {
  const auto zone = internalization_zone(base_solve().policy);
  EXPECT_FALSE(zone.empty());
  EXPECT_LE(zone.q_low, 0.0);
  EXPECT_GE(zone.q_high, 0.0);
  EXPECT_EQ(zone.width, zone.q_high - zone.q_low);
  EXPECT_EQ(zone.midpoint(), 0.0);
}

// Zero rate at a node iff neither one-sided marginal value leaves the
// proportional-cost band: p_fwd + kq <= phi and p_bwd + kq >= -phi.
TEST(Internalization, DeadZoneCharacterization) {
  const auto& b = base_solve();
  const auto th = b.surface.row(0);
  const auto& p = b.params;
  const std::size_t n = b.grid.size();
  std::size_t dead_run = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const auto d = upwind_differences(th, b.grid.step(), i);
    const double q = b.grid[i];
    const bool dead = d.forward + p.impact_k * q <= p.cost.phi + 1e-9 && d.backward + p.impact_k * q >= -p.cost.phi - 1e-9;
    EXPECT_EQ(std::abs(b.policy.exec_rate[i]) <= kZeroRateTolerance, dead) << "q = " << q;
    if (dead) ++dead_run;
  }
  const auto zone = internalization_zone(b.policy);
  EXPECT_EQ(zone.node_count, dead_run);
  EXPECT_DOUBLE_EQ(zone.width, static_cast<double>(dead_run - 1) * b.grid.step());
}

TEST(Internalization, CollapsesWithoutFrictions) {
  ModelParams p = reference_params();
  p.cost.phi = 0.0;
  p.impact_k = 0.0;
  const InventoryGrid g(p.q_max, 201, p.sizes);
  const auto zone = internalization_zone(extract_policy(solve(p, g), p, g, 0.0));
  EXPECT_LE(zone.node_count, 1u);
  EXPECT_EQ(zone.width, 0.0);
}

TEST(Internalization, SyntheticRates) {
  PolicyTable pol;
  pol.q = {-2, -1, 0, 1, 2};
  pol.q_max = 2;
  pol.step = 1;
  pol.exec_rate = {5, 0, 0, 0, -5};
  auto z = internalization_zone(pol);
  EXPECT_EQ(z.q_low, -1.0);
  EXPECT_EQ(z.q_high, 1.0);
  EXPECT_EQ(z.node_count, 3u);

  pol.exec_rate = {5, 3, -1, -2, -5};
  z = internalization_zone(pol);
  EXPECT_TRUE(z.empty());
  EXPECT_EQ(z.q_low, -0.5);
  EXPECT_EQ(z.width, 0.0);

  pol.exec_rate = {5, 4, 3, 2, 1};
  z = internalization_zone(pol);
  EXPECT_TRUE(z.empty());
  EXPECT_EQ(z.q_low, 2.0);
}
