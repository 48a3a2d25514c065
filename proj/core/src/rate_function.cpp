// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/rate_function.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "perbranch/trig_interpolant.hpp"

namespace perbranch {

namespace {

std::vector<std::uint64_t> key_of(const Vec& v) {
  std::vector<std::uint64_t> key(static_cast<size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) key[static_cast<size_t>(i)] = std::bit_cast<std::uint64_t>(v[i] + 0.0);
  return key;
}

int default_nodes(int dim) { return dim == 1 ? 256 : 64; }

void check_dim(const RateProfile& profile, const Vec& v, const char* what) {
  if (v.size() != profile.dim()) {
    std::ostringstream os;
    os << what << " has dimension " << v.size() << ", media has " << profile.dim();
    throw DomainError(os.str());
  }
}

}  // namespace

RateProfile::RateProfile(MediaPtr media, RateOptions options)
    : media_(std::move(media)), options_(options) {
  if (!media_) throw ConfigError("rate profile needs a medium");
  const int n = options_.nodes_per_unit > 0 ? options_.nodes_per_unit : default_nodes(media_->dim());
  options_.nodes_per_unit = n;
  grid_ = TorusGrid(media_->dim(), n);
  origin_ = evaluate(Vec::Zero(media_->dim()));
}

std::shared_ptr<const SpectralPoint> RateProfile::evaluate(const Vec& tilt) const {
  check_dim(*this, tilt, "tilt");
  const auto key = key_of(tilt);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto point = std::make_shared<SpectralPoint>();
  point->tilt = tilt;
  const TiltedOperator op = assemble_tilted(media_, grid_, tilt);
  point->triple = std::make_shared<const SpectralTriple>(principal_eigen(op, options_.eigen));
  point->mu = point->triple->eigenvalue;
  const CellSolution cell = solve_cell_problem(media_, *point->triple);
  point->ell = cell.effective_drift;
  point->xi = effective_diffusivity(cell);
  std::lock_guard lock(mutex_);
  return cache_.try_emplace(key, std::move(point)).first->second;
}

std::size_t RateProfile::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

LegendrePoint legendre_transform(const RateProfile& profile, const Vec& c) {
  check_dim(profile, c, "velocity");
  const RateOptions& opt = profile.options();
  const double radius = opt.reach_radius;
  Vec zeta = profile.xi0().ldlt().solve(c - profile.vbar());
  if (zeta.norm() > radius) zeta *= 0.999 * radius / zeta.norm();

  auto point = profile.evaluate(zeta);
  auto objective = [&c](const SpectralPoint& p) { return p.mu - p.tilt.dot(c); };
  int iterations = 0;
  bool converged = false;
  for (; iterations < opt.max_newton_iterations; ++iterations) {
    const Vec g = point->ell - c;
    if (g.lpNorm<Eigen::Infinity>() <= opt.newton_tol) {
      converged = true;
      break;
    }
    const Vec step = -point->xi.ldlt().solve(g);
    const double slope = g.dot(step);
    const double j0 = objective(*point);
    double s = 1.0;
    std::shared_ptr<const SpectralPoint> next;
    for (int halving = 0; halving < 40; ++halving, s *= 0.5) {
      const Vec trial = point->tilt + s * step;
      if (trial.norm() > radius) continue;
      auto candidate = profile.evaluate(trial);
      const bool armijo = objective(*candidate) <= j0 + 1e-4 * s * slope;
      const bool gradient_drop = (candidate->ell - c).norm() < g.norm();
      if (armijo || gradient_drop) {
        next = std::move(candidate);
        break;
      }
    }
    if (!next) {
      if ((point->tilt + step).norm() > radius) {
        std::ostringstream os;
        os << "velocity outside reachability box (tilt would exceed |zeta| = " << radius << ")";
        throw DomainError(os.str());
      }
      break;
    }
    const bool tiny = (next->tilt - point->tilt).lpNorm<Eigen::Infinity>() < 1e-15 * std::max(1.0, point->tilt.norm());
    point = std::move(next);
    if (tiny) {
      converged = (point->ell - c).lpNorm<Eigen::Infinity>() <= 1e3 * opt.newton_tol;
      break;
    }
  }
  const double residual = (point->ell - c).lpNorm<Eigen::Infinity>();
  if (!converged) {
    if (point->tilt.norm() > 0.99 * radius) {
      std::ostringstream os;
      os << "velocity outside reachability box (|zeta| reached " << point->tilt.norm() << ")";
      throw DomainError(os.str());
    }
    std::ostringstream os;
    os << "Legendre Newton did not converge in " << opt.max_newton_iterations << " iterations (residual " << residual << ")";
    throw ConvergenceError(os.str());
  }
  LegendrePoint out;
  out.velocity = c;
  out.tilt = point->tilt;
  out.mu = point->mu;
  out.value = point->tilt.dot(c) - point->mu;
  out.xi = point->xi;
  out.hessian_det = 1.0 / point->xi.determinant();
  out.gradient_residual = residual;
  out.iterations = iterations;
  return out;
}

Vec effective_velocity(const RateProfile& profile) {
  const Vec vbar = profile.vbar();
  const LegendrePoint lp = legendre_transform(profile, vbar);
  const double mismatch = std::abs(lp.value + profile.mu0());
  if (mismatch > 1e-8) {
    std::ostringstream os;
    os << "effective velocity cross-check failed: Phi(vbar) + mu(0) = " << mismatch;
    throw ConvergenceError(os.str());
  }
  return vbar;
}

KernelAsymptote kernel_asymptotic(const RateProfile& profile, double t, const Vec& x, const Vec& y) {
  check_dim(profile, x, "x");
  check_dim(profile, y, "y");
  if (!(t >= profile.options().t_min)) {
    std::ostringstream os;
    os << "kernel asymptotic needs t >= " << profile.options().t_min << " (got " << t << ")";
    throw DomainError(os.str());
  }
  const Vec c = (y - x) / t;
  const LegendrePoint lp = legendre_transform(profile, c);
  const auto point = profile.evaluate(lp.tilt);
  const TrigInterpolant phi(point->triple->grid, point->triple->right);
  const TrigInterpolant phi_adj(point->triple->grid, point->triple->left);
  const int d = profile.dim();
  KernelAsymptote k;
  k.t = t;
  k.x = x;
  k.y = y;
  k.tilt = lp.tilt;
  k.rate = lp.value;
  k.det_xi = lp.xi.determinant();
  k.value = std::pow(2.0 * std::numbers::pi * t, -0.5 * d) / std::sqrt(k.det_xi) * std::exp(-t * lp.value) * phi(x) *
            phi_adj(y);
  return k;
}

double aronson_bound(const RateProfile& profile, double c, double t, const Vec& x, const Vec& y) {
  check_dim(profile, x, "x");
  check_dim(profile, y, "y");
  if (!(t > 0.0)) throw DomainError("Aronson bound needs t > 0");
  const double phi_vbar = -profile.mu0();
  return c * std::pow(t, -0.5 * profile.dim()) * std::exp(-t * phi_vbar - (y - x).squaredNorm() / (c * t));
}

double front_normalizer(const RateProfile& profile, double t, const Vec& y) {
  check_dim(profile, y, "y");
  if (!(t >= profile.options().t_min)) {
    std::ostringstream os;
    os << "front normalizer needs t >= " << profile.options().t_min << " (got " << t << ")";
    throw DomainError(os.str());
  }
  const LegendrePoint lp = legendre_transform(profile, Vec(y / t + profile.vbar()));
  return std::pow(2.0 * std::numbers::pi * t, -0.5 * profile.dim()) / std::sqrt(profile.xi0().determinant()) *
         std::exp(-t * lp.value);
}

}  // namespace perbranch
