// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "perbranch/common.hpp"
#include "perbranch/periodic_media.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/torus_spectral.hpp"

namespace perbranch {

/// What is being counted: every particle (total population, periodic in x)
/// or the particles in the unit cube corner + [0,1)^d.
struct MomentTarget {
  enum class Kind { Total, Cube };
  Kind kind = Kind::Total;
  Vec corner;

  static MomentTarget total() { return {}; }
  static MomentTarget cube(Vec corner) { return {Kind::Cube, std::move(corner)}; }
};

enum class SourceCoupling {
  Trapezoidal,  // source averaged over both ends of the step (lower orders are already advanced)
  Lagged,       // source frozen at the start of the step
};

struct MomentOptions {
  int nodes_per_unit = 0;  // 0: 256 (total, d=1), 32 (total, d=2), 64 (cube, d=1), 16 (cube, d=2)
  int window_periods = 0;  // cube targets: 0 sizes the window from the horizon
  double dt = 1e-3;
  SourceCoupling coupling = SourceCoupling::Trapezoidal;
  int rannacher_half_steps = 4;  // implicit start-up for the (discontinuous) cube indicator
};

/// Grid functions of m_k (cube target) or of the total-population moment at the sample times.
struct MomentField {
  int order = 1;
  MomentTarget target;
  TorusGrid grid;
  std::vector<double> times;
  std::vector<GridFunction> values;
  std::string media_hash;
  double min_value = 0.0;  // smallest value over all samples (nonnegativity diagnostic)

  /// Value at sample `sample` and grid node x (for the total target x is reduced mod 1).
  double at(std::size_t sample, const Vec& x) const;
};

/// Window grid covering [lo, hi]^d plus a margin that the process cannot
/// leave with appreciable probability before `horizon`.
TorusGrid window_grid(const MediaSpec& media, int nodes_per_unit, double horizon, double lo, double hi);

/// Solves orders 1..K jointly, sampling at `times` (nondecreasing, >= 0).
std::vector<MomentField> solve_moment_hierarchy(const MediaPtr& media, const MomentTarget& target, int max_order,
                                                std::span<const double> times, const MomentOptions& options = {});

/// Order k alone; lower orders are solved along the way.
MomentField solve_mk(const MediaPtr& media, const MomentTarget& target, int k, std::span<const double> times,
                     const MomentOptions& options = {});

/// Stirling number of the second kind, 1 <= i <= k <= 25.
std::uint64_t stirling2(int k, int i);

/// E(n^k) = sum_i S(k, i) m_i at every sample; `fields` holds orders 1..k in order.
std::vector<GridFunction> assemble_raw_moment(std::span<const MomentField> fields, int k);

struct FkOptions {
  int nodes_per_unit = 0;  // 0: 256 in d=1, 32 in d=2
  double dt = 1e-3;
  double tail_tolerance = 1e-8;
  double max_horizon = 2000.0;
  EigenOptions eigen;
};

/// Limits f_k of the normalized total-population moments on the unit torus.
struct FkTable {
  int max_order = 1;
  TorusGrid grid;
  double mu = 0.0;
  double c0 = 0.0;  // max phi / min phi, bounds the torus semigroup on constants
  std::vector<GridFunction> f;  // f[k - 1] = f_k
  std::vector<double> horizon;  // integration horizon per order (0 for k = 1)
  std::vector<double> tail;     // certified tail bound per order
  double growth_constant = 0.0;  // smallest A with f_k <= A^k k! for all computed k
  std::string media_hash;

  const GridFunction& operator[](int k) const { return f.at(static_cast<std::size_t>(k - 1)); }
};

/// f_1 = phi_0; f_k = int_0^inf e^{-k mu t} e^{tL}(alpha sum_i C(k,i) f_i f_{k-i}) dt,
/// with the horizon extended until the tail bound falls below the tolerance.
FkTable total_moment_fk(const MediaPtr& media, int max_order, const FkOptions& options = {});

/// Source alpha sum_{i=1}^{k-1} C(k,i) f_i f_{k-i} of order k built from the table.
GridFunction fk_source(const MediaSpec& media, const FkTable& table, int k);

/// q_1(t) = m_1(t) e^{-mu t} - phi on the unit torus, evolved in the
/// complement of the principal mode so that decay below rounding level of
/// the total stays resolved.
std::vector<GridFunction> first_moment_transient(const MediaPtr& media, std::span<const double> times,
                                                 const FkOptions& options = {});

/// u(t, x, .) on a window grid for the first-moment equation, from the
/// adjoint evolution of a discrete delta at the node x.
std::vector<GridFunction> kernel_from(const MediaPtr& media, const TorusGrid& window, const Vec& x,
                                      std::span<const double> times, const EvolveOptions& options);

/// Integral of the piecewise multilinear interpolant of f over corner + [0,1]^d.
double cube_integral(const TorusGrid& grid, const GridFunction& f, const Vec& corner);

struct LocalLimitOptions {
  int nodes_per_unit = 64;
  int window_periods = 0;
  double dt = 1e-3;
  int rannacher_half_steps = 4;
};

struct LocalLimitRow {
  double t = 0.0;
  Vec y;       // path value y(t)
  Vec corner;  // y(t) + vbar t
  double moment = 0.0;      // E(n^k) at the cube
  double normalizer = 0.0;  // g(t, y(t))
  double ratio = 0.0;       // moment / normalizer^k
  double target = 0.0;      // f_k(x)
  double deviation = 0.0;   // |ratio - target|
};

/// Ratio E(n^{y(t) + vbar t}(t, x)^k) / g(t, y(t))^k at each time.
std::vector<LocalLimitRow> check_local_limit(const RateProfile& profile, int k, const std::function<Vec(double)>& path,
                                             const Vec& x, std::span<const double> times,
                                             const LocalLimitOptions& options = {});

}  // namespace perbranch
