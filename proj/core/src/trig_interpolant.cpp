// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/trig_interpolant.hpp"

#include <cmath>
#include <numbers>

namespace perbranch {

namespace {

using cplx = std::complex<double>;

// Forward DFT along one axis of length n: c_k = (1/n) sum_j f_j e^{-2 pi i k j / n}
// for k in [-n/2, n/2]; the two Nyquist entries (even n) carry half weight each.
std::vector<cplx> axis_dft(const std::vector<cplx>& f, int n, const std::vector<int>& waves) {
  std::vector<cplx> out(waves.size());
  for (size_t q = 0; q < waves.size(); ++q) {
    const int k = waves[q];
    cplx acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((static_cast<long>(k) * j) % n) / n;
      acc += f[static_cast<size_t>(j)] * cplx(std::cos(phase), std::sin(phase));
    }
    double w = 1.0 / n;
    if (n % 2 == 0 && std::abs(k) == n / 2) w *= 0.5;
    out[q] = acc * w;
  }
  return out;
}

}  // namespace

TrigInterpolant::TrigInterpolant(const TorusGrid& grid, const GridFunction& values)
    : dim_(grid.dim()), n_(grid.nodes_per_unit()) {
  if (!grid.is_unit_torus() || grid.origin() != 0) {
    throw DomainError("trigonometric interpolation requires the unit torus grid");
  }
  if (values.size() != grid.size()) throw DomainError("grid function size does not match grid");
  const int half = n_ / 2;
  for (int k = -half; k <= half; ++k) {
    if (n_ % 2 == 1 && std::abs(k) > (n_ - 1) / 2) continue;
    waves_.push_back(k);
  }
  const size_t nw = waves_.size();
  if (dim_ == 1) {
    std::vector<cplx> f(static_cast<size_t>(n_));
    for (int j = 0; j < n_; ++j) f[static_cast<size_t>(j)] = values[j];
    coeff_ = axis_dft(f, n_, waves_);
    return;
  }
  // Separable 2-D transform: first along x (fast index), then along y.
  std::vector<cplx> partial(static_cast<size_t>(n_) * nw);  // [row y][wave kx]
  for (int iy = 0; iy < n_; ++iy) {
    std::vector<cplx> row(static_cast<size_t>(n_));
    for (int ix = 0; ix < n_; ++ix) row[static_cast<size_t>(ix)] = values[static_cast<Index>(ix) + static_cast<Index>(n_) * iy];
    auto c = axis_dft(row, n_, waves_);
    for (size_t q = 0; q < nw; ++q) partial[static_cast<size_t>(iy) * nw + q] = c[q];
  }
  coeff_.assign(nw * nw, 0.0);  // [ky][kx]
  for (size_t qx = 0; qx < nw; ++qx) {
    std::vector<cplx> col(static_cast<size_t>(n_));
    for (int iy = 0; iy < n_; ++iy) col[static_cast<size_t>(iy)] = partial[static_cast<size_t>(iy) * nw + qx];
    auto c = axis_dft(col, n_, waves_);
    for (size_t qy = 0; qy < nw; ++qy) coeff_[qy * nw + qx] = c[qy];
  }
}

double TrigInterpolant::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw DomainError("point dimension does not match interpolant");
  const size_t nw = waves_.size();
  auto basis = [&](double xi) {
    const double r = xi - std::floor(xi);
    std::vector<cplx> e(nw);
    for (size_t q = 0; q < nw; ++q) {
      const double phase = 2.0 * std::numbers::pi * waves_[q] * r;
      e[q] = cplx(std::cos(phase), std::sin(phase));
    }
    return e;
  };
  const auto ex = basis(x[0]);
  if (dim_ == 1) {
    cplx acc = 0.0;
    for (size_t q = 0; q < nw; ++q) acc += coeff_[q] * ex[q];
    return acc.real();
  }
  const auto ey = basis(x[1]);
  cplx acc = 0.0;
  for (size_t qy = 0; qy < nw; ++qy) {
    cplx row = 0.0;
    for (size_t qx = 0; qx < nw; ++qx) row += coeff_[qy * nw + qx] * ex[qx];
    acc += row * ey[qy];
  }
  return acc.real();
}

}  // namespace perbranch
