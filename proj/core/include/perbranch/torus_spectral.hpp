// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "perbranch/common.hpp"
#include "perbranch/periodic_media.hpp"
#include "perbranch/torus_grid.hpp"

namespace perbranch {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Nodal coefficients of  1/2 sum a_ij d_ij + sum drift_i d_i + potential.
struct StencilCoefficients {
  int dim = 1;
  std::array<std::array<GridFunction, 2>, 2> diffusion;
  std::array<GridFunction, 2> drift;
  GridFunction potential;
};

/// Second-order central differences with periodic wrap; the mixed derivative
/// uses the centered four-point cross stencil.
SparseMatrix assemble_operator(const TorusGrid& grid, const StencilCoefficients& coeff);

/// Discretization of e^{-zeta.x} L (e^{zeta.x} .) on a torus grid, or of a
/// derived operator sharing its grid (the drift-only operator K_zeta, the
/// transpose for adjoint problems).
class TiltedOperator {
 public:
  enum class Kind { Tilted, DriftOnly };

  TiltedOperator(MediaPtr media, TorusGrid grid, Vec tilt, SparseMatrix matrix,
                 Kind kind = Kind::Tilted, bool transposed = false);

  const MediaPtr& media() const { return media_; }
  const TorusGrid& grid() const { return grid_; }
  const Vec& tilt() const { return tilt_; }
  const SparseMatrix& matrix() const { return matrix_; }
  Kind kind() const { return kind_; }
  bool is_transposed() const { return transposed_; }

  TiltedOperator transposed() const;
  Mat dense() const { return Mat(matrix_); }

  GridFunction apply(const GridFunction& f) const { return matrix_ * f; }
  double norm_inf() const;
  /// max_i sum_j A_ij; bounds the growth rate of e^{tA} in sup norm when A is Metzler.
  double max_row_sum() const;
  /// True when every off-diagonal entry is nonnegative.
  bool is_metzler() const;

 private:
  MediaPtr media_;
  TorusGrid grid_;
  Vec tilt_;
  SparseMatrix matrix_;
  Kind kind_;
  bool transposed_;
};

/// Nodal coefficients of the tilted generator:
///   1/2 a d^2 + (b + a zeta) . grad + (1/2 zeta^T a zeta + b.zeta + r).
StencilCoefficients tilted_coefficients(const MediaSpec& media, const TorusGrid& grid, const Vec& tilt);

/// Requires nodes_per_unit >= 2 * max wave number + 2.
TiltedOperator assemble_tilted(const MediaPtr& media, const TorusGrid& grid, const Vec& tilt);

struct EigenOptions {
  double tol = 1e-10;
  int max_iterations = 100;
  double seed_time = 0.1;  // tau of the exp(tau A) power-iteration seed
  int seed_powers = 5;
};

/// Principal (Perron) eigen-data of a tilted operator on the unit torus,
/// normalized so that <phi, phi*> = 1 = <1, phi*> under the rectangle rule.
struct SpectralTriple {
  Vec tilt;
  double eigenvalue = 0.0;
  double adjoint_eigenvalue = 0.0;
  GridFunction right;  // phi_zeta
  GridFunction left;   // phi*_zeta
  TorusGrid grid;
  double residual = 0.0;
  double adjoint_residual = 0.0;
  double residual_tolerance = 0.0;  // effective tolerance after the rounding floor
  int iterations = 0;
};

SpectralTriple principal_eigen(const TiltedOperator& op, const EigenOptions& options = {});

/// Crank-Nicolson propagator (I - dt/2 A)^{-1}(I + dt/2 A) with an optional
/// leading sequence of implicit-Euler half steps (Rannacher start-up) that
/// damps the stiff modes of rough initial data.
class CrankNicolson {
 public:
  CrankNicolson(const SparseMatrix& a, double dt);

  double dt() const { return dt_; }
  const SparseMatrix& generator() const { return a_; }

  void step(GridFunction& u) const;
  /// Trapezoidal source: u <- (I - dt/2 A)^{-1}[(I + dt/2 A)u + dt/2 (s_old + s_new)].
  void step(GridFunction& u, const GridFunction& s_old, const GridFunction& s_new) const;
  /// Implicit Euler with step dt/2: u <- (I - dt/2 A)^{-1}(u + dt/2 s).
  void half_implicit_step(GridFunction& u, const GridFunction* source = nullptr) const;

 private:
  SparseMatrix a_;
  double dt_;
  SparseMatrix explicit_part_;
  Eigen::SparseLU<SparseMatrix> implicit_part_;
};

struct EvolveOptions {
  double dt = 1e-3;
  /// Number of implicit half steps replacing the first CN steps (each pair of
  /// half steps replaces one full step).
  int rannacher_half_steps = 0;
  /// Growth rate used for the instability envelope e^{(g+1)t}; defaults to
  /// the max row sum of the operator.
  std::optional<double> growth_rate;
};

/// Samples of e^{tA} initial at the requested (nondecreasing) times.
std::vector<GridFunction> evolve_semigroup(const TiltedOperator& op, const GridFunction& initial,
                                           std::span<const double> times, const EvolveOptions& options = {});

/// Discrete delta at a node: e_node / h^d.
GridFunction discrete_delta(const TorusGrid& grid, Index node);

}  // namespace perbranch
