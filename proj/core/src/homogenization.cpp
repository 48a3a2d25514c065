// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/homogenization.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace perbranch {

namespace {

constexpr double positivity_floor = 1e-12;

void check_positive(const SpectralTriple& triple) {
  const double m = triple.right.minCoeff();
  if (!(m > positivity_floor)) {
    std::ostringstream os;
    os << "principal eigenfunction below positivity floor (min " << m << ")";
    throw DomainError(os.str());
  }
}

GridFunction central_difference(const TorusGrid& grid, const GridFunction& f, int axis) {
  GridFunction g(grid.size());
  const double inv = 1.0 / (2.0 * grid.spacing());
  for (Index i = 0; i < grid.size(); ++i) g[i] = (f[grid.neighbor(i, axis, 1)] - f[grid.neighbor(i, axis, -1)]) * inv;
  return g;
}

}  // namespace

std::vector<GridFunction> transformed_drift(const MediaSpec& media, const SpectralTriple& triple) {
  check_positive(triple);
  const TorusGrid& grid = triple.grid;
  const int d = grid.dim();
  const GridFunction log_phi = triple.right.array().log().matrix();
  std::vector<GridFunction> grad_log(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) grad_log[static_cast<size_t>(j)] = central_difference(grid, log_phi, j);
  std::vector<GridFunction> v(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    GridFunction vi = sample_field(media.drift(i), grid);
    for (int j = 0; j < d; ++j) {
      const GridFunction aij = sample_field(media.diffusion(i, j), grid);
      vi += aij.cwiseProduct(grad_log[static_cast<size_t>(j)] + GridFunction::Constant(grid.size(), triple.tilt[j]));
    }
    v[static_cast<size_t>(i)] = std::move(vi);
  }
  return v;
}

TiltedOperator build_K(const MediaPtr& media, const SpectralTriple& triple) {
  const TorusGrid& grid = triple.grid;
  StencilCoefficients c;
  c.dim = grid.dim();
  const auto v = transformed_drift(*media, triple);
  for (int i = 0; i < c.dim; ++i) {
    for (int j = 0; j < c.dim; ++j) c.diffusion[static_cast<size_t>(i)][static_cast<size_t>(j)] = sample_field(media->diffusion(i, j), grid);
    c.drift[static_cast<size_t>(i)] = v[static_cast<size_t>(i)];
  }
  c.potential = GridFunction::Zero(grid.size());
  return TiltedOperator(media, grid, triple.tilt, assemble_operator(grid, c), TiltedOperator::Kind::DriftOnly);
}

Vec effective_drift(const MediaSpec& media, const SpectralTriple& triple) {
  const auto v = transformed_drift(media, triple);
  const GridFunction psi = triple.right.cwiseProduct(triple.left);
  Vec ell(triple.grid.dim());
  for (int i = 0; i < ell.size(); ++i) ell[i] = grid_inner(triple.grid, v[static_cast<size_t>(i)], psi);
  return ell;
}

CellSolution solve_cell_problem(const MediaPtr& media, const SpectralTriple& triple) {
  const TorusGrid& grid = triple.grid;
  const int d = grid.dim();
  const Index n = grid.size();
  CellSolution cell;
  cell.tilt = triple.tilt;
  cell.grid = grid;
  cell.drift = transformed_drift(*media, triple);
  cell.invariant_density = triple.right.cwiseProduct(triple.left);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) cell.diffusion[static_cast<size_t>(i)][static_cast<size_t>(j)] = sample_field(media->diffusion(i, j), grid);
  cell.effective_drift.resize(d);
  for (int i = 0; i < d; ++i) cell.effective_drift[i] = grid_inner(grid, cell.drift[static_cast<size_t>(i)], cell.invariant_density);

  const TiltedOperator k_op = build_K(media, triple);
  // Bordered system [K 1; h^d psi*^T 0][eta; lambda] = [ell - V; 0].
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(k_op.matrix().nonZeros() + 2 * n));
  for (Index col = 0; col < k_op.matrix().outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(k_op.matrix(), col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  const double vol = grid.cell_volume();
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, n, 1.0);
    t.emplace_back(n, i, vol * cell.invariant_density[i]);
  }
  SparseMatrix bordered(n + 1, n + 1);
  bordered.setFromTriplets(t.begin(), t.end());
  bordered.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(bordered);
  if (lu.info() != Eigen::Success) throw ConvergenceError("cell problem: bordered system is singular");

  cell.solvability_residual.resize(d);
  cell.gauge_multiplier.resize(d);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = GridFunction::Constant(n, cell.effective_drift[i]) - cell.drift[static_cast<size_t>(i)];
    rhs[n] = 0.0;
    cell.solvability_residual[i] = grid_inner(grid, rhs.head(n), cell.invariant_density);
    const Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) throw ConvergenceError("cell problem: non-finite corrector");
    GridFunction eta = sol.head(n);
    cell.gauge_multiplier[i] = sol[n];
    const double res = (k_op.matrix() * eta - rhs.head(n)).lpNorm<Eigen::Infinity>();
    cell.cell_residual = std::max(cell.cell_residual, res);
    cell.corrector.push_back(std::move(eta));
  }
  return cell;
}

Mat effective_diffusivity(const CellSolution& cell) {
  const TorusGrid& grid = cell.grid;
  const int d = grid.dim();
  // grad_eta[i][k] = d_k eta_i
  std::vector<std::vector<GridFunction>> grad(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) grad[static_cast<size_t>(i)].push_back(central_difference(grid, cell.corrector[static_cast<size_t>(i)], k));
  Mat xi = Mat::Zero(d, d);
  const double vol = grid.cell_volume();
  for (Index node = 0; node < grid.size(); ++node) {
    Mat j(d, d);  // j(k, i) = delta_ki + d_k eta_i
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i) j(k, i) = (k == i ? 1.0 : 0.0) + grad[static_cast<size_t>(i)][static_cast<size_t>(k)][node];
    Mat a(d, d);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) a(k, l) = cell.diffusion[static_cast<size_t>(k)][static_cast<size_t>(l)][node];
    xi += (vol * cell.invariant_density[node]) * (j.transpose() * a * j);
  }
  const double asym = (xi - xi.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) {
    std::ostringstream os;
    os << "effective diffusivity asymmetric beyond tolerance (" << asym << ")";
    throw ConvergenceError(os.str());
  }
  return 0.5 * (xi + xi.transpose());
}

HomogenizedData homogenize(const MediaPtr& media, const SpectralTriple& triple) {
  const CellSolution cell = solve_cell_problem(media, triple);
  return {triple.tilt, cell.effective_drift, effective_diffusivity(cell)};
}

}  // namespace perbranch
