// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>

#include "perbranch/common.hpp"

namespace perbranch {

/// Uniform periodic grid covering `periods` unit cells per axis, starting at
/// the integer coordinate `origin`. Node i on an axis sits at origin + i/n.
/// With periods == 1 and origin == 0 this is the unit torus [0,1)^d.
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int nodes_per_unit, int periods = 1, int origin = 0);

  int dim() const { return dim_; }
  int nodes_per_unit() const { return n_; }
  int periods() const { return periods_; }
  int origin() const { return origin_; }
  int nodes_per_axis() const { return n_ * periods_; }
  Index size() const;
  double spacing() const { return 1.0 / n_; }
  double cell_volume() const;
  bool is_unit_torus() const { return periods_ == 1; }

  std::array<int, 2> multi_index(Index node) const;
  Index node(std::array<int, 2> multi) const;  // wraps periodically
  Index neighbor(Index node, int axis, int offset) const;
  std::array<double, 2> coords(Index node) const;

  /// Node whose coordinates match x exactly up to 1e-9 of a spacing.
  /// Throws DomainError when x is not a grid node of the window.
  Index node_at(std::span<const double> x) const;

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) = default;

 private:
  int dim_ = 1;
  int n_ = 1;
  int periods_ = 1;
  int origin_ = 0;
};

/// Rectangle-rule inner product over the whole grid window.
double grid_inner(const TorusGrid& grid, const GridFunction& f, const GridFunction& g);
double grid_integral(const TorusGrid& grid, const GridFunction& f);

}  // namespace perbranch
