// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "perbranch/common.hpp"
#include "perbranch/homogenization.hpp"
#include "perbranch/torus_spectral.hpp"

namespace perbranch {

/// Spectral data at one tilt: mu, its gradient ell and Hessian Xi, and the
/// eigenfunctions they were computed from.
struct SpectralPoint {
  Vec tilt;
  double mu = 0.0;
  Vec ell;
  Mat xi;
  std::shared_ptr<const SpectralTriple> triple;
};

struct RateOptions {
  int nodes_per_unit = 0;  // 0 picks 256 in d=1 and 64 in d=2
  EigenOptions eigen;
  double newton_tol = 1e-10;  // sup norm of ell(zeta) - c
  int max_newton_iterations = 50;
  double reach_radius = 6.0;  // accepted tilts satisfy |zeta| <= reach_radius
  double t_min = 1.0;
};

/// Memoized zeta -> (mu, ell, Xi) evaluator for one medium plus the
/// quantities at zeta = 0. Safe to share between threads.
class RateProfile {
 public:
  explicit RateProfile(MediaPtr media, RateOptions options = {});

  const MediaPtr& media() const { return media_; }
  const RateOptions& options() const { return options_; }
  const TorusGrid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }

  std::shared_ptr<const SpectralPoint> evaluate(const Vec& tilt) const;
  double mu(const Vec& tilt) const { return evaluate(tilt)->mu; }

  double mu0() const { return origin_->mu; }
  const Vec& vbar() const { return origin_->ell; }
  const Mat& xi0() const { return origin_->xi; }
  const SpectralTriple& triple0() const { return *origin_->triple; }

  std::size_t cache_size() const;

 private:
  MediaPtr media_;
  RateOptions options_;
  TorusGrid grid_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<std::uint64_t>, std::shared_ptr<const SpectralPoint>> cache_;
  std::shared_ptr<const SpectralPoint> origin_;
};

struct LegendrePoint {
  Vec velocity;      // c
  double value = 0;  // Phi(c)
  Vec tilt;          // zeta-hat
  double mu = 0.0;   // mu(zeta-hat)
  Mat xi;            // Xi at zeta-hat, the inverse of D^2 Phi(c)
  double hessian_det = 0.0;  // det D^2 Phi(c) = 1 / det Xi
  double gradient_residual = 0.0;
  int iterations = 0;
};

/// Phi(c) = sup_zeta (zeta.c - mu(zeta)) by damped Newton on ell(zeta) = c.
/// Throws DomainError when the iterate leaves the reach ball and
/// ConvergenceError when Newton stalls.
LegendrePoint legendre_transform(const RateProfile& profile, const Vec& c);

/// ell(0), cross-checked against Phi(vbar) = -mu(0).
Vec effective_velocity(const RateProfile& profile);

struct KernelAsymptote {
  double t = 0.0;
  Vec x;
  Vec y;
  Vec tilt;
  double rate = 0.0;  // Phi((y - x)/t)
  double det_xi = 0.0;
  double value = 0.0;
};

/// Leading term (2 pi t)^{-d/2} det Xi^{-1/2} e^{-t Phi} phi(x) phi*(y) of the
/// kernel u(t, x, y) of the first-moment equation.
KernelAsymptote kernel_asymptotic(const RateProfile& profile, double t, const Vec& x, const Vec& y);

/// c t^{-d/2} exp(-t Phi(vbar) - |y - x|^2 / (c t)).
double aronson_bound(const RateProfile& profile, double c, double t, const Vec& x, const Vec& y);

/// g(t, y) = (2 pi t)^{-d/2} det Xi_0^{-1/2} e^{-t Phi(y/t + vbar)}.
double front_normalizer(const RateProfile& profile, double t, const Vec& y);

}  // namespace perbranch
