#pragma once

#include <random>

#include "dmm/grid.hpp"
#include "dmm/model.hpp"
#include "dmm/policy.hpp"
#include "dmm/solver.hpp"

namespace dmm::test {

// Base solve at the reference parameters, shared by every test that needs it.
struct BaseSolve {
  ModelParams params = reference_params();
  InventoryGrid grid{params.q_max, 201, params.sizes};
  ValueSurface surface = solve(params, grid);
  PolicyTable policy = extract_policy(surface, params, grid, 0.0);
};

inline const BaseSolve& base_solve() {
  static const BaseSolve s;
  return s;
}

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240611);
  return g;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

}  // namespace dmm::test
