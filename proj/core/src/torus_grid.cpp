// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/torus_grid.hpp"

#include <cmath>
#include <string>

namespace perbranch {

TorusGrid::TorusGrid(int dim, int nodes_per_unit, int periods, int origin)
    : dim_(dim), n_(nodes_per_unit), periods_(periods), origin_(origin) {
  if (dim != 1 && dim != 2) throw DomainError("grid dimension must be 1 or 2");
  if (nodes_per_unit < 2) throw DomainError("grid needs at least 2 nodes per unit");
  if (periods < 1) throw DomainError("grid needs at least one period");
}

Index TorusGrid::size() const {
  const Index m = nodes_per_axis();
  return dim_ == 1 ? m : m * m;
}

double TorusGrid::cell_volume() const {
  const double h = spacing();
  return dim_ == 1 ? h : h * h;
}

std::array<int, 2> TorusGrid::multi_index(Index node) const {
  const int m = nodes_per_axis();
  if (dim_ == 1) return {static_cast<int>(node), 0};
  return {static_cast<int>(node % m), static_cast<int>(node / m)};
}

Index TorusGrid::node(std::array<int, 2> multi) const {
  const int m = nodes_per_axis();
  auto wrap = [m](int i) { return ((i % m) + m) % m; };
  if (dim_ == 1) return wrap(multi[0]);
  return static_cast<Index>(wrap(multi[0])) + static_cast<Index>(m) * wrap(multi[1]);
}

Index TorusGrid::neighbor(Index node_index, int axis, int offset) const {
  auto mi = multi_index(node_index);
  mi[static_cast<size_t>(axis)] += offset;
  return node(mi);
}

std::array<double, 2> TorusGrid::coords(Index node_index) const {
  const auto mi = multi_index(node_index);
  const double h = spacing();
  return {origin_ + mi[0] * h, dim_ == 2 ? origin_ + mi[1] * h : 0.0};
}

Index TorusGrid::node_at(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw DomainError("point dimension does not match grid");
  std::array<int, 2> mi{0, 0};
  for (int j = 0; j < dim_; ++j) {
    const double s = (x[static_cast<size_t>(j)] - origin_) * n_;
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-9 || r < 0 || r >= nodes_per_axis()) {
      throw DomainError("point " + std::to_string(x[static_cast<size_t>(j)]) +
                        " is not a node of the grid window");
    }
    mi[static_cast<size_t>(j)] = static_cast<int>(r);
  }
  return node(mi);
}

double grid_inner(const TorusGrid& grid, const GridFunction& f, const GridFunction& g) {
  return grid.cell_volume() * f.dot(g);
}

double grid_integral(const TorusGrid& grid, const GridFunction& f) {
  return grid.cell_volume() * f.sum();
}

}  // namespace perbranch
