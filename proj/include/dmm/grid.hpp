#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dmm/error.hpp"
#include "dmm/model.hpp"

namespace dmm {

/// Uniform inventory lattice on [-q_max, q_max], symmetric about 0, both
/// endpoints included. Every trade size must be a whole number of steps so
/// that q +/- z lands on a node.
class InventoryGrid {
public:
  InventoryGrid(double q_max, std::size_t nodes, const SizeGrid& sizes) : q_max_(q_max) {
    if (!(q_max > 0.0) || !std::isfinite(q_max))
      throw InvalidArgument("InventoryGrid: q_max must be finite and > 0");
    if (nodes < 3 || nodes % 2 == 0)
      throw InvalidArgument("InventoryGrid: node count must be odd and >= 3 (got " +
                            std::to_string(nodes) + ")");
    step_ = 2.0 * q_max / static_cast<double>(nodes - 1);
    const auto half = static_cast<long>(nodes - 1) / 2;
    q_.reserve(nodes);
    // Integer offsets keep the lattice exactly symmetric: q_i == -q_{n-1-i}.
    for (long i = -half; i <= half; ++i) q_.push_back(static_cast<double>(i) * step_);
    q_.front() = -q_max;
    q_.back() = q_max;

    offsets_.reserve(sizes.size());
    for (double z : sizes.sizes) {
      const double ratio = z / step_;
      const double rounded = std::round(ratio);
      if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9)
        throw InvalidArgument("InventoryGrid: trade size " + std::to_string(z) +
                              " is not a whole multiple of the inventory step " +
                              std::to_string(step_));
      offsets_.push_back(static_cast<std::size_t>(rounded));
    }
  }

  std::size_t size() const noexcept { return q_.size(); }
  double step() const noexcept { return step_; }
  double q_max() const noexcept { return q_max_; }
  double operator[](std::size_t i) const noexcept { return q_[i]; }
  const std::vector<double>& nodes() const noexcept { return q_; }

  /// Node shift corresponding to size bucket k.
  std::size_t offset(std::size_t bucket) const noexcept { return offsets_[bucket]; }
  std::size_t buckets() const noexcept { return offsets_.size(); }

  /// Index of the node closest to q (q is clamped to the lattice).
  std::size_t nearest(double q) const noexcept {
    const double pos = (q + q_max_) / step_;
    if (!(pos > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(std::lround(pos));
    return i >= q_.size() ? q_.size() - 1 : i;
  }

private:
  double q_max_;
  double step_ = 0.0;
  std::vector<double> q_;
  std::vector<std::size_t> offsets_;
};

}  // namespace dmm
