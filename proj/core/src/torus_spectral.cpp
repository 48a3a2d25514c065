// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/torus_spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace perbranch {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

}  // namespace

SparseMatrix assemble_operator(const TorusGrid& grid, const StencilCoefficients& c) {
  const Index n = grid.size();
  const int d = grid.dim();
  const double h = grid.spacing();
  const double h2 = h * h;
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(n) * (d == 1 ? 3 : 9));
  for (Index i = 0; i < n; ++i) {
    double diag = c.potential[i];
    for (int ax = 0; ax < d; ++ax) {
      const double a = c.diffusion[static_cast<size_t>(ax)][static_cast<size_t>(ax)][i];
      const double v = c.drift[static_cast<size_t>(ax)][i];
      const double second = 0.5 * a / h2;
      const double first = v / (2.0 * h);
      t.emplace_back(i, grid.neighbor(i, ax, +1), second + first);
      t.emplace_back(i, grid.neighbor(i, ax, -1), second - first);
      diag -= 2.0 * second;
    }
    if (d == 2) {
      // 1/2 (a12 + a21) d_xy with d_xy u ~ (u_{++} - u_{+-} - u_{-+} + u_{--}) / (4h^2)
      const double a12 = 0.5 * (c.diffusion[0][1][i] + c.diffusion[1][0][i]);
      const double w = a12 / (4.0 * h2);
      const auto mi = grid.multi_index(i);
      t.emplace_back(i, grid.node({mi[0] + 1, mi[1] + 1}), w);
      t.emplace_back(i, grid.node({mi[0] + 1, mi[1] - 1}), -w);
      t.emplace_back(i, grid.node({mi[0] - 1, mi[1] + 1}), -w);
      t.emplace_back(i, grid.node({mi[0] - 1, mi[1] - 1}), w);
    }
    t.emplace_back(i, i, diag);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());  // duplicates (n = 2 wrap) are summed
  m.makeCompressed();
  return m;
}

TiltedOperator::TiltedOperator(MediaPtr media, TorusGrid grid, Vec tilt, SparseMatrix matrix, Kind kind,
                               bool transposed)
    : media_(std::move(media)), grid_(grid), tilt_(std::move(tilt)), matrix_(std::move(matrix)),
      kind_(kind), transposed_(transposed) {}

TiltedOperator TiltedOperator::transposed() const {
  SparseMatrix t = matrix_.transpose();
  t.makeCompressed();
  return TiltedOperator(media_, grid_, tilt_, std::move(t), kind_, !transposed_);
}

double TiltedOperator::norm_inf() const {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(matrix_.rows());
  for (Index k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.maxCoeff();
}

double TiltedOperator::max_row_sum() const {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(matrix_.rows());
  for (Index k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) rows[it.row()] += it.value();
  return rows.maxCoeff();
}

bool TiltedOperator::is_metzler() const {
  for (Index k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it)
      if (it.row() != it.col() && it.value() < 0.0) return false;
  return true;
}

StencilCoefficients tilted_coefficients(const MediaSpec& media, const TorusGrid& grid, const Vec& tilt) {
  const int d = media.dim();
  if (grid.dim() != d) throw DomainError("media and grid dimensions differ");
  if (tilt.size() != d) throw DomainError("tilt dimension does not match media");
  StencilCoefficients c;
  c.dim = d;
  const Index n = grid.size();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) c.diffusion[static_cast<size_t>(i)][static_cast<size_t>(j)] = sample_field(media.diffusion(i, j), grid);
    c.drift[static_cast<size_t>(i)] = sample_field(media.drift(i), grid);
  }
  c.potential = sample_field(media.branching(), grid) - sample_field(media.killing(), grid);
  for (Index node = 0; node < n; ++node) {
    double quad = 0.0;
    for (int i = 0; i < d; ++i) {
      double a_zeta = 0.0;
      for (int j = 0; j < d; ++j) a_zeta += c.diffusion[static_cast<size_t>(i)][static_cast<size_t>(j)][node] * tilt[j];
      quad += 0.5 * tilt[i] * a_zeta + c.drift[static_cast<size_t>(i)][node] * tilt[i];
      c.drift[static_cast<size_t>(i)][node] += a_zeta;  // original b_i read before update
    }
    c.potential[node] += quad;
  }
  return c;
}

TiltedOperator assemble_tilted(const MediaPtr& media, const TorusGrid& grid, const Vec& tilt) {
  const int needed = 2 * media->max_wave_number() + 2;
  if (grid.nodes_per_unit() < needed) {
    throw DomainError("grid resolution " + std::to_string(grid.nodes_per_unit()) + " below required " +
                      std::to_string(needed));
  }
  return TiltedOperator(media, grid, tilt, assemble_operator(grid, tilted_coefficients(*media, grid, tilt)));
}

// ---------------------------------------------------------------------------
// Crank-Nicolson

CrankNicolson::CrankNicolson(const SparseMatrix& a, double dt) : a_(a), dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const SparseMatrix id = identity(a.rows());
  explicit_part_ = id + (0.5 * dt) * a;
  SparseMatrix implicit = id - (0.5 * dt) * a;
  implicit.makeCompressed();
  implicit_part_.analyzePattern(implicit);
  implicit_part_.factorize(implicit);
  if (implicit_part_.info() != Eigen::Success) throw InstabilityError("Crank-Nicolson factorization failed");
}

void CrankNicolson::step(GridFunction& u) const {
  GridFunction rhs = explicit_part_ * u;
  u = implicit_part_.solve(rhs);
}

void CrankNicolson::step(GridFunction& u, const GridFunction& s_old, const GridFunction& s_new) const {
  GridFunction rhs = explicit_part_ * u + (0.5 * dt_) * (s_old + s_new);
  u = implicit_part_.solve(rhs);
}

void CrankNicolson::half_implicit_step(GridFunction& u, const GridFunction* source) const {
  GridFunction rhs = u;
  if (source) rhs += (0.5 * dt_) * *source;
  u = implicit_part_.solve(rhs);
}

GridFunction discrete_delta(const TorusGrid& grid, Index node) {
  GridFunction d = GridFunction::Zero(grid.size());
  d[node] = 1.0 / grid.cell_volume();
  return d;
}

std::vector<GridFunction> evolve_semigroup(const TiltedOperator& op, const GridFunction& initial,
                                           std::span<const double> times, const EvolveOptions& options) {
  if (initial.size() != op.grid().size()) throw DomainError("initial data size does not match grid");
  if (!(options.dt > 0.0)) throw DomainError("time step must be positive");
  const double growth = options.growth_rate.value_or(op.max_row_sum());
  const double u0_norm = std::max(initial.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());

  std::vector<GridFunction> out;
  out.reserve(times.size());
  GridFunction u = initial;
  double t = 0.0;
  int half_steps_left = options.rannacher_half_steps;
  std::optional<CrankNicolson> stepper;
  for (double target : times) {
    if (target < t - 1e-12) throw DomainError("sample times must be nondecreasing and nonnegative");
    const double span = target - t;
    if (span > 1e-14) {
      const long steps = std::max(1L, std::lround(span / options.dt));
      const double dt = span / static_cast<double>(steps);
      if (!stepper || std::abs(stepper->dt() - dt) > 1e-15 * dt) stepper.emplace(op.matrix(), dt);
      for (long s = 0; s < steps; ++s) {
        if (half_steps_left >= 2) {
          stepper->half_implicit_step(u);
          stepper->half_implicit_step(u);
          half_steps_left -= 2;
        } else {
          stepper->step(u);
        }
        if ((s & 63) == 63 || s == steps - 1) {
          const double tt = t + (s + 1) * dt;
          const double norm = u.lpNorm<Eigen::Infinity>();
          if (!std::isfinite(norm) || norm > 10.0 * u0_norm * std::exp((growth + 1.0) * tt)) {
            std::ostringstream os;
            os << "semigroup growth exceeded envelope at t=" << tt << " (norm " << norm << ")";
            throw InstabilityError(os.str());
          }
        }
      }
      t = target;
    }
    out.push_back(u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Principal eigenpair

namespace {

struct PerronVector {
  GridFunction v;
  double eigenvalue = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

void normalize_sign(GridFunction& v) {
  const double s = v.sum() < 0.0 ? -1.0 : 1.0;
  v *= s / v.lpNorm<Eigen::Infinity>();
}

// Shifted inverse iteration for the rightmost eigenvalue. For a positive
// iterate the Collatz-Wielandt bounds min_i (Av)_i/v_i <= mu <= max_i (Av)_i/v_i
// keep the shift to the right of the Perron root, so the iteration cannot
// lock onto another branch.
PerronVector perron_iteration(const SparseMatrix& a, GridFunction v, double tol, int max_iterations) {
  const Index n = a.rows();
  const SparseMatrix id = identity(n);
  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  double current_shift = std::numeric_limits<double>::quiet_NaN();
  PerronVector out;
  normalize_sign(v);
  for (int it = 1; it <= max_iterations; ++it) {
    const GridFunction w = a * v;
    double shift;
    const double rayleigh = v.dot(w) / v.dot(v);
    const double scale = 1.0 + std::abs(rayleigh);
    if (v.minCoeff() > 0.0) {
      const GridFunction ratio = w.cwiseQuotient(v);
      const double upper = ratio.maxCoeff();
      const double lower = ratio.minCoeff();
      shift = upper + std::max(upper - lower, 1e-10 * scale);
    } else {
      const double res = (w - rayleigh * v).norm() / v.norm();
      shift = rayleigh + std::max(res, 1e-10 * scale);
    }
    if (!(shift == current_shift)) {
      SparseMatrix m = shift * id - a;
      m.makeCompressed();
      if (!analyzed) {
        lu.analyzePattern(m);
        analyzed = true;
      }
      lu.factorize(m);
      if (lu.info() != Eigen::Success) throw ConvergenceError("shifted factorization failed in eigen solve");
      current_shift = shift;
    }
    GridFunction next = lu.solve(v);
    if (!next.allFinite()) throw ConvergenceError("non-finite iterate in eigen solve");
    normalize_sign(next);
    v = std::move(next);
    const GridFunction av = a * v;
    out.eigenvalue = v.dot(av) / v.dot(v);
    out.residual = (av - out.eigenvalue * v).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= tol) {
      out.v = std::move(v);
      return out;
    }
  }
  std::ostringstream os;
  os << "eigen iteration did not converge in " << max_iterations << " iterations (residual " << out.residual
     << ", tolerance " << tol << ")";
  throw ConvergenceError(os.str());
}

GridFunction power_seed(const SparseMatrix& a, const EigenOptions& options) {
  GridFunction v = GridFunction::Ones(a.rows());
  if (options.seed_powers <= 0) return v;
  const int substeps = 10;
  CrankNicolson cn(a, options.seed_time / substeps);
  for (int p = 0; p < options.seed_powers; ++p) {
    for (int s = 0; s < substeps; ++s) cn.step(v);
    v /= v.lpNorm<Eigen::Infinity>();
  }
  return v;
}

}  // namespace

SpectralTriple principal_eigen(const TiltedOperator& op, const EigenOptions& options) {
  if (!(options.tol > 0.0)) throw DomainError("eigen tolerance must be positive");
  const TorusGrid& grid = op.grid();
  if (!grid.is_unit_torus()) throw DomainError("principal eigenproblem is posed on the unit torus");
  const SparseMatrix& a = op.matrix();
  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = std::max(options.tol, 4.0 * eps * op.norm_inf());

  PerronVector right = perron_iteration(a, power_seed(a, options), tol, options.max_iterations);
  SparseMatrix at = a.transpose();
  at.makeCompressed();
  PerronVector left = perron_iteration(at, power_seed(at, options), tol, options.max_iterations);

  if (right.v.minCoeff() <= 0.0 || left.v.minCoeff() <= 0.0) {
    std::ostringstream os;
    os << "principal eigenvector not positive (min right " << right.v.minCoeff() << ", min left "
       << left.v.minCoeff() << ", residuals " << right.residual << ", " << left.residual << ")";
    throw ConvergenceError(os.str());
  }

  SpectralTriple out;
  out.tilt = op.tilt();
  out.grid = grid;
  out.iterations = right.iterations + left.iterations;
  GridFunction phi = std::move(right.v);
  GridFunction phi_star = std::move(left.v);
  phi_star /= grid_integral(grid, phi_star);
  phi /= grid_inner(grid, phi, phi_star);
  const GridFunction a_phi = a * phi;
  out.eigenvalue = phi_star.dot(a_phi) / phi_star.dot(phi);
  const GridFunction at_phi_star = at * phi_star;
  out.adjoint_eigenvalue = phi_star.dot(at_phi_star) / phi_star.dot(phi_star);
  out.residual = (a_phi - out.eigenvalue * phi).lpNorm<Eigen::Infinity>();
  out.adjoint_residual = (at_phi_star - out.eigenvalue * phi_star).lpNorm<Eigen::Infinity>();
  out.residual_tolerance = tol * std::max({1.0, phi.lpNorm<Eigen::Infinity>(), phi_star.lpNorm<Eigen::Infinity>()});
  out.right = std::move(phi);
  out.left = std::move(phi_star);
  return out;
}

}  // namespace perbranch
