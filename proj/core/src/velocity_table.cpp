// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/velocity_table.hpp"

#include <algorithm>
#include <cmath>

namespace perbranch {

namespace {

// Catmull-Rom weights for the nodes -1, 0, 1, 2 at fractional offset s in [0, 1].
std::array<double, 4> catmull_rom(double s) {
  const double s2 = s * s, s3 = s2 * s;
  return {0.5 * (-s3 + 2.0 * s2 - s), 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0), 0.5 * (-3.0 * s3 + 4.0 * s2 + s),
          0.5 * (s3 - s2)};
}

}  // namespace

VelocityGrid::VelocityGrid(Vec lo, Vec hi, int points) : lo_(std::move(lo)), hi_(std::move(hi)), points_(points) {
  if (lo_.size() != hi_.size() || lo_.size() < 1 || lo_.size() > 2) throw DomainError("velocity grid needs d = 1 or 2");
  if (points_ < 2) throw DomainError("velocity grid needs at least two points per axis");
  for (Index j = 0; j < lo_.size(); ++j)
    if (!(hi_[j] > lo_[j])) throw DomainError("velocity grid bounds must satisfy lo < hi");
}

VelocityGrid VelocityGrid::box(int dim, double lo, double hi, int points) {
  return VelocityGrid(Vec::Constant(dim, lo), Vec::Constant(dim, hi), points);
}

Index VelocityGrid::size() const { return dim() == 1 ? points_ : static_cast<Index>(points_) * points_; }

std::array<int, 2> VelocityGrid::multi_index(Index node) const {
  if (dim() == 1) return {static_cast<int>(node), 0};
  return {static_cast<int>(node % points_), static_cast<int>(node / points_)};
}

Index VelocityGrid::node(std::array<int, 2> m) const {
  return dim() == 1 ? m[0] : static_cast<Index>(m[1]) * points_ + m[0];
}

Vec VelocityGrid::point(Index node) const {
  const auto m = multi_index(node);
  Vec v(dim());
  for (int j = 0; j < dim(); ++j) v[j] = lo_[j] + m[static_cast<size_t>(j)] * spacing(j);
  return v;
}

bool VelocityGrid::contains(const Vec& v) const {
  for (int j = 0; j < dim(); ++j) {
    const double slack = 1e-12 * spacing(j);
    if (v[j] < lo_[j] - slack || v[j] > hi_[j] + slack) return false;
  }
  return true;
}

Vec VelocityGrid::clamp(const Vec& v) const { return v.cwiseMax(lo_).cwiseMin(hi_); }

Index VelocityGrid::find_node(const Vec& v) const {
  if (v.size() != dim() || !contains(v)) return -1;
  std::array<int, 2> m{0, 0};
  for (int j = 0; j < dim(); ++j) {
    const double s = (v[j] - lo_[j]) / spacing(j);
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-9) return -1;
    m[static_cast<size_t>(j)] = static_cast<int>(r);
  }
  return node(m);
}

CubicTable::CubicTable(VelocityGrid grid, Vec values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw DomainError("table values do not match velocity grid");
}

double CubicTable::node_value(long i, long j) const {
  const long n = grid_.points();
  // Quadratic ghost extrapolation (linear for two-point axes), applied per axis.
  auto axis = [n](long k, auto&& f) {
    if (k < 0) return n >= 3 ? 3.0 * f(0) - 3.0 * f(1) + f(2) : 2.0 * f(0) - f(1);
    if (k >= n) return n >= 3 ? 3.0 * f(n - 1) - 3.0 * f(n - 2) + f(n - 3) : 2.0 * f(n - 1) - f(n - 2);
    return f(k);
  };
  if (grid_.dim() == 1) return axis(i, [this](long k) { return values_[k]; });
  return axis(j, [&](long jj) {
    return axis(i, [&](long ii) { return values_[grid_.node({static_cast<int>(ii), static_cast<int>(jj)})]; });
  });
}

double CubicTable::operator()(const Vec& v) const {
  const Vec p = grid_.clamp(v);
  std::array<long, 2> base{0, 0};
  std::array<std::array<double, 4>, 2> w{};
  for (int j = 0; j < grid_.dim(); ++j) {
    const double s = (p[j] - grid_.lo()[j]) / grid_.spacing(j);
    long b = static_cast<long>(std::floor(s));
    b = std::clamp(b, 0L, static_cast<long>(grid_.points()) - 2);
    base[static_cast<size_t>(j)] = b;
    w[static_cast<size_t>(j)] = catmull_rom(s - static_cast<double>(b));
  }
  double acc = 0.0;
  if (grid_.dim() == 1) {
    for (int a = 0; a < 4; ++a) acc += w[0][static_cast<size_t>(a)] * node_value(base[0] - 1 + a, 0);
    return acc;
  }
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a)
      acc += w[0][static_cast<size_t>(a)] * w[1][static_cast<size_t>(b)] * node_value(base[0] - 1 + a, base[1] - 1 + b);
  return acc;
}

}  // namespace perbranch
