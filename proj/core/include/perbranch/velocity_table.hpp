// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "perbranch/common.hpp"

namespace perbranch {

/// Tensor grid of velocities: `points` nodes per axis spanning [lo_j, hi_j].
class VelocityGrid {
 public:
  VelocityGrid() = default;
  VelocityGrid(Vec lo, Vec hi, int points);
  /// Same bounds on every axis.
  static VelocityGrid box(int dim, double lo, double hi, int points);

  int dim() const { return static_cast<int>(lo_.size()); }
  int points() const { return points_; }
  Index size() const;
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  double spacing(int axis) const { return (hi_[axis] - lo_[axis]) / (points_ - 1); }
  Vec point(Index node) const;
  std::array<int, 2> multi_index(Index node) const;
  Index node(std::array<int, 2> multi) const;
  bool contains(const Vec& v) const;
  /// Closest point of the box.
  Vec clamp(const Vec& v) const;
  /// Node equal to v within 1e-9 of a spacing, or -1.
  Index find_node(const Vec& v) const;

 private:
  Vec lo_;
  Vec hi_;
  int points_ = 2;
};

/// Catmull-Rom (bicubic in d = 2) interpolation of nodal values, with
/// quadratically extrapolated ghost nodes at the box faces. Reproduces quadratics.
class CubicTable {
 public:
  CubicTable() = default;
  CubicTable(VelocityGrid grid, Vec values);

  const VelocityGrid& grid() const { return grid_; }
  const Vec& values() const { return values_; }
  /// Requires grid().contains(v).
  double operator()(const Vec& v) const;

 private:
  double node_value(long i, long j) const;

  VelocityGrid grid_;
  Vec values_;
};

}  // namespace perbranch
