// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "perbranch/common.hpp"
#include "perbranch/nelder_mead.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/velocity_table.hpp"

namespace perbranch {

/// gamma_1(v) = -Phi(v).
double gamma1(const RateProfile& profile, const Vec& v);

/// Where the supremum defining gamma_k was found.
enum class OptimumKind {
  Interior,    // (w, u) with u in [u_min, 1 - u_min]
  UpperLimit,  // u -> 1 along w = v(1 - u): gamma_{k-1}(v) + gamma_1(v)
  LowerLimit,  // u -> 0 along w = v(1 - u): gamma_1(v)
};

const char* to_string(OptimumKind kind);

struct GammaEvaluation {
  Vec v;
  int order = 1;
  double value = 0.0;
  double gap = 0.0;  // value - order * gamma_1(v)
  Vec w;             // arg-sup (interior) or the limit point v
  double u = 1.0;
  OptimumKind kind = OptimumKind::UpperLimit;
  double interior_value = 0.0;
  double search_radius = 0.0;
  int doublings = 0;
};

struct GammaOptions {
  double u_min = 1e-3;
  int scan_w = 0;  // w nodes per axis in the coarse scan; 0 picks 201 (d=1) or 41 (d=2)
  int scan_u = 0;  // u nodes in the coarse scan; 0 picks 100 (d=1) or 40 (d=2)
  int refine_starts = 3;
  double radius_factor = 4.0;  // M = factor * diameter {gamma_1 >= -3 k mu(0)}
  int max_doublings = 4;
  int threads = 0;
  NelderMeadOptions nelder_mead{0.05, 1e-10, 1e-14, 4000};
};

/// gamma_1 .. gamma_K on a velocity grid. Off-node values use cubic
/// interpolation floored by the lower orders and by k gamma_1; outside the
/// box gamma_1 continues as the second-order Taylor polynomial of -Phi at the
/// nearest face point and gamma_k by max(gamma_{k-1}, k gamma_1).
class GammaTable {
 public:
  static GammaTable build(std::shared_ptr<const RateProfile> profile, VelocityGrid grid, int max_order,
                          GammaOptions options = {});

  const VelocityGrid& grid() const { return grid_; }
  int max_order() const { return static_cast<int>(orders_.size()); }
  double mu0() const { return mu0_; }
  const Vec& vbar() const { return vbar_; }
  const GammaOptions& options() const { return options_; }
  const RateProfile& profile() const { return *profile_; }

  const GammaEvaluation& node_evaluation(int k, Index node) const;
  double node_value(int k, Index node) const { return node_evaluation(k, node).value; }

  /// Interpolated gamma_k(v), k in [0, max_order]; gamma_0 = 0.
  double eval(int k, const Vec& v) const;

  /// gamma_k(v) at a node from the table, elsewhere by a fresh evaluation.
  GammaEvaluation evaluate(int k, const Vec& v) const;

 private:
  friend GammaEvaluation gamma_k(const GammaTable& table, const Vec& v, int k, const GammaEvaluation* seed);

  double gamma1_extended(const Vec& v) const;

  std::shared_ptr<const RateProfile> profile_;
  VelocityGrid grid_;
  GammaOptions options_;
  double mu0_ = 0.0;
  Vec vbar_;
  std::vector<Vec> tilt_;  // zeta-hat per node
  std::vector<Mat> hessian_;  // D^2 Phi per node
  std::vector<CubicTable> tables_;  // tables_[k - 1]
  std::vector<std::vector<GammaEvaluation>> orders_;
};

/// gamma_k(v) from the variational formula, using gamma_{k-1} and gamma_1 of the table.
/// `seed` optionally supplies a starting arg-sup (for example the one of order k - 1).
GammaEvaluation gamma_k(const GammaTable& table, const Vec& v, int k, const GammaEvaluation* seed = nullptr);

/// gamma_k(v) - k gamma_1(v), set to 0 when within 1e-6 of 0.
double intermittency_gap(const GammaTable& table, const Vec& v, int k);

struct RegionReport {
  int order = 1;
  std::vector<Vec> velocities;
  std::vector<double> gamma;
  std::vector<double> gap;
  std::vector<char> member;  // in G_k
  double tolerance = 0.0;
  double inner_radius = 0.0;  // largest grid ball around vbar inside G_k
  double outer_radius = 0.0;  // largest |v - vbar| over members
  int nesting_violations = 0;  // members of G_k outside G_{k-1}
  bool contains_vbar = false;
};

/// G_k masks for k = 1..K on the given velocities (nodes of the table are
/// read from it, other points evaluated afresh).
std::vector<RegionReport> region_scan(const GammaTable& table, std::span<const Vec> velocities);

}  // namespace perbranch
