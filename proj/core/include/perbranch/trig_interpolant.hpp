// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "perbranch/common.hpp"
#include "perbranch/torus_grid.hpp"

namespace perbranch {

/// Trigonometric interpolation of a grid function on the unit torus. Exact
/// for trigonometric polynomials whose wave numbers stay below n/2.
class TrigInterpolant {
 public:
  TrigInterpolant(const TorusGrid& grid, const GridFunction& values);

  double operator()(std::span<const double> x) const;
  double operator()(const Vec& x) const { return (*this)(std::span<const double>(x.data(), x.size())); }

 private:
  int dim_;
  int n_;
  // Coefficients indexed by wave k in [-n/2, n/2] per axis (row-major in d=2),
  // with the Nyquist weight already folded in.
  std::vector<std::complex<double>> coeff_;
  std::vector<int> waves_;
};

}  // namespace perbranch
