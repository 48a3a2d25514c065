// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "perbranch/common.hpp"
#include "perbranch/torus_spectral.hpp"

namespace perbranch {

/// Corrector data of the cell problem K_zeta eta = ell(zeta) - V, gauged by
/// <eta, psi*> = 0 with psi* = phi phi* the invariant density of K_zeta.
struct CellSolution {
  Vec tilt;
  TorusGrid grid;
  std::vector<GridFunction> corrector;  // eta_i, one per axis
  std::vector<GridFunction> drift;      // V_i = b_i + (a (zeta + grad log phi))_i
  GridFunction invariant_density;       // psi*
  std::array<std::array<GridFunction, 2>, 2> diffusion;
  Vec effective_drift;
  Vec solvability_residual;  // <ell - V, psi*> per axis, before solving
  Vec gauge_multiplier;      // multiplier of the bordered system per axis
  double cell_residual = 0.0;
};

struct HomogenizedData {
  Vec tilt;
  Vec effective_drift;
  Mat effective_diffusivity;
};

/// Drift field V of the h-transformed operator, with grad log phi from
/// central differences of log phi.
std::vector<GridFunction> transformed_drift(const MediaSpec& media, const SpectralTriple& triple);

/// Drift-only operator 1/2 a d^2 + V . grad; annihilates constants exactly.
TiltedOperator build_K(const MediaPtr& media, const SpectralTriple& triple);

/// ell(zeta) = integral of V psi*.
Vec effective_drift(const MediaSpec& media, const SpectralTriple& triple);

CellSolution solve_cell_problem(const MediaPtr& media, const SpectralTriple& triple);

/// Xi = integral (I + grad eta)^T a (I + grad eta) psi*, symmetrized.
Mat effective_diffusivity(const CellSolution& cell);

HomogenizedData homogenize(const MediaPtr& media, const SpectralTriple& triple);

}  // namespace perbranch
