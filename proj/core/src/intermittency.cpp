// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/intermittency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "perbranch/parallel.hpp"

namespace perbranch {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

struct Candidate {
  double value;
  Vec x;  // (w..., u)
};

}  // namespace

double gamma1(const RateProfile& profile, const Vec& v) { return -legendre_transform(profile, v).value; }

const char* to_string(OptimumKind kind) {
  switch (kind) {
    case OptimumKind::Interior:
      return "interior";
    case OptimumKind::UpperLimit:
      return "upper_limit";
    case OptimumKind::LowerLimit:
      return "lower_limit";
  }
  return "unknown";
}

GammaTable GammaTable::build(std::shared_ptr<const RateProfile> profile, VelocityGrid grid, int max_order,
                             GammaOptions options) {
  if (!profile) throw ConfigError("gamma table needs a rate profile");
  if (max_order < 1) throw DomainError("gamma order must be at least 1");
  if (grid.dim() != profile->dim()) throw DomainError("velocity grid dimension does not match media");
  if (grid.points() < 3) throw DomainError("velocity grid needs at least three points per axis");
  GammaTable table;
  table.profile_ = std::move(profile);
  table.grid_ = std::move(grid);
  table.options_ = options;
  table.mu0_ = table.profile_->mu0();
  table.vbar_ = table.profile_->vbar();

  const Index n = table.grid_.size();
  table.tilt_.resize(static_cast<size_t>(n));
  table.hessian_.resize(static_cast<size_t>(n));
  std::vector<GammaEvaluation> first(static_cast<size_t>(n));
  parallel_for(
      static_cast<size_t>(n),
      [&](size_t i) {
        const Vec v = table.grid_.point(static_cast<Index>(i));
        LegendrePoint lp;
        try {
          lp = legendre_transform(*table.profile_, v);
        } catch (const DomainError& e) {
          std::ostringstream os;
          os << "velocity grid node (" << v.transpose() << ") is not reachable: " << e.what();
          throw ConfigError(os.str());
        }
        table.tilt_[i] = lp.tilt;
        table.hessian_[i] = lp.xi.inverse();
        GammaEvaluation& ev = first[i];
        ev.v = v;
        ev.order = 1;
        ev.value = -lp.value;
        ev.gap = 0.0;
        ev.w = v;
        ev.u = 1.0;
        ev.kind = OptimumKind::UpperLimit;
        ev.interior_value = neg_inf;
      },
      options.threads);
  Vec values(n);
  for (Index i = 0; i < n; ++i) values[i] = first[static_cast<size_t>(i)].value;
  table.tables_.emplace_back(table.grid_, values);
  table.orders_.push_back(std::move(first));

  for (int k = 2; k <= max_order; ++k) {
    std::vector<GammaEvaluation> evals(static_cast<size_t>(n));
    const auto& lower = table.orders_.back();
    parallel_for(
        static_cast<size_t>(n),
        [&](size_t i) {
          const GammaEvaluation* seed = lower[i].kind == OptimumKind::Interior ? &lower[i] : nullptr;
          evals[i] = gamma_k(table, table.grid_.point(static_cast<Index>(i)), k, seed);
        },
        options.threads);
    for (Index i = 0; i < n; ++i) values[i] = evals[static_cast<size_t>(i)].value;
    table.tables_.emplace_back(table.grid_, values);
    table.orders_.push_back(std::move(evals));
  }
  return table;
}

const GammaEvaluation& GammaTable::node_evaluation(int k, Index node) const {
  if (k < 1 || k > max_order()) throw DomainError("gamma order not in table");
  if (node < 0 || node >= grid_.size()) throw DomainError("velocity node out of range");
  return orders_[static_cast<size_t>(k - 1)][static_cast<size_t>(node)];
}

double GammaTable::gamma1_extended(const Vec& v) const {
  if (grid_.contains(v)) return tables_[0](v);
  const Vec face = grid_.clamp(v);
  // nearest node on the face supplies zeta-hat and D^2 Phi
  std::array<int, 2> m{0, 0};
  for (int j = 0; j < grid_.dim(); ++j)
    m[static_cast<size_t>(j)] = static_cast<int>(std::lround((face[j] - grid_.lo()[j]) / grid_.spacing(j)));
  const Index node = grid_.node(m);
  const Vec dv = v - face;
  const Vec& zeta = tilt_[static_cast<size_t>(node)];
  const Mat& hess = hessian_[static_cast<size_t>(node)];
  // gradient of -Phi at the face point, moved from the node to the face by the Hessian
  const Vec grad = -(zeta + hess * (face - grid_.point(node)));
  return tables_[0](face) + grad.dot(dv) - 0.5 * dv.dot(hess * dv);
}

double GammaTable::eval(int k, const Vec& v) const {
  if (k == 0) return 0.0;
  if (k < 0 || k > max_order()) throw DomainError("gamma order not in table");
  const double g1 = gamma1_extended(v);
  if (k == 1) return g1;
  const double floor = std::max(eval(k - 1, v), k * g1);
  if (!grid_.contains(v)) return floor;
  return std::max(tables_[static_cast<size_t>(k - 1)](v), floor);
}

GammaEvaluation GammaTable::evaluate(int k, const Vec& v) const {
  const Index node = grid_.find_node(v);
  if (node >= 0 && k <= max_order()) return node_evaluation(k, node);
  if (k == 1) {
    GammaEvaluation ev;
    ev.v = v;
    ev.value = gamma1(*profile_, v);
    ev.w = v;
    ev.interior_value = neg_inf;
    return ev;
  }
  return gamma_k(*this, v, k, nullptr);
}

GammaEvaluation gamma_k(const GammaTable& table, const Vec& v, int k, const GammaEvaluation* seed) {
  if (k < 2) throw DomainError("gamma_k needs k >= 2");
  if (k - 1 > table.max_order()) throw DomainError("gamma table lacks order k - 1");
  if (v.size() != table.grid().dim()) throw DomainError("velocity dimension does not match table");
  const int d = table.grid().dim();
  const GammaOptions& opt = table.options();
  const double u_min = opt.u_min;

  auto objective = [&](const Vec& w, double u) {
    const Vec inner = (v - w) / u;
    const Vec outer = w / (1.0 - u);
    return u * table.eval(k - 1, inner) + u * table.eval(1, inner) + (1.0 - u) * table.eval(1, outer);
  };

  GammaEvaluation ev;
  ev.v = v;
  ev.order = k;
  const double g1 = table.eval(1, v);
  const double upper = table.eval(k - 1, v) + g1;
  const double lower = g1;

  // search radius from the diameter of {gamma_1 >= -3 k mu(0)} over the table nodes
  const double level = -3.0 * k * std::max(table.mu0(), 1e-3);
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (Index i = 0; i < table.grid().size(); ++i) {
    if (table.node_value(1, i) >= level) {
      const Vec p = table.grid().point(i);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const double diameter = (hi.array() >= lo.array()).all() ? std::max((hi - lo).norm(), 1.0) : 1.0;
  double radius = opt.radius_factor * diameter;

  const int scan_w = opt.scan_w > 0 ? opt.scan_w : (d == 1 ? 201 : 41);
  const int scan_u = opt.scan_u > 0 ? opt.scan_u : (d == 1 ? 100 : 40);

  Candidate best{neg_inf, Vec()};
  int doublings = 0;
  for (;; ++doublings) {
    std::vector<Candidate> top;
    auto offer = [&](double value, const Vec& x) {
      if (!std::isfinite(value)) return;
      if (static_cast<int>(top.size()) < opt.refine_starts) {
        top.push_back({value, x});
      } else {
        auto worst = std::min_element(top.begin(), top.end(), [](auto& a, auto& b) { return a.value < b.value; });
        if (value > worst->value) *worst = {value, x};
      }
    };
    Vec x(d + 1);
    const double dw = 2.0 * radius / (scan_w - 1);
    const long w_total = d == 1 ? scan_w : static_cast<long>(scan_w) * scan_w;
    for (long iw = 0; iw < w_total; ++iw) {
      x[0] = v[0] - radius + static_cast<double>(iw % scan_w) * dw;
      if (d == 2) x[1] = v[1] - radius + static_cast<double>(iw / scan_w) * dw;
      for (int iu = 0; iu < scan_u; ++iu) {
        const double u = u_min + (1.0 - 2.0 * u_min) * iu / (scan_u - 1);
        x[d] = u;
        offer(objective(x.head(d), u), x);
      }
    }
    if (seed && seed->kind == OptimumKind::Interior && seed->w.size() == d &&
        (seed->w - v).lpNorm<Eigen::Infinity>() < radius) {
      x.head(d) = seed->w;
      x[d] = std::clamp(seed->u, u_min, 1.0 - u_min);
      offer(objective(x.head(d), x[d]), x);
    }

    auto penalized = [&](const Vec& p) {
      const double u = p[d];
      if (u < u_min || u > 1.0 - u_min) return std::numeric_limits<double>::infinity();
      if ((p.head(d) - v).lpNorm<Eigen::Infinity>() > radius) return std::numeric_limits<double>::infinity();
      return -objective(p.head(d), u);
    };
    NelderMeadOptions nm = opt.nelder_mead;
    nm.initial_step = std::max(dw, 1e-3);
    best = {neg_inf, Vec()};
    std::sort(top.begin(), top.end(), [](auto& a, auto& b) { return a.value > b.value; });
    for (const auto& start : top) {
      NelderMeadResult r = nelder_mead(penalized, start.x, nm);
      // restart once from the optimum to shake off a collapsed simplex
      nm.initial_step *= 0.1;
      r = nelder_mead(penalized, r.x, nm);
      nm.initial_step *= 10.0;
      const double value = -r.value;
      if (value > best.value) best = {value, r.x};
      if (start.value > best.value) best = start;
    }
    const bool saturated =
        best.x.size() == d + 1 && (best.x.head(d) - v).lpNorm<Eigen::Infinity>() > 0.95 * radius && best.value > upper &&
        best.value > lower;
    if (!saturated) break;
    if (doublings >= opt.max_doublings) {
      std::ostringstream os;
      os << "gamma_" << k << " search box saturated at v=(" << v.transpose() << ") after " << doublings
         << " doublings (M=" << radius << ")";
      throw ConvergenceError(os.str());
    }
    radius *= 2.0;
  }

  ev.search_radius = radius;
  ev.doublings = doublings;
  ev.interior_value = best.value;
  if (best.value > upper && best.value > lower) {
    ev.value = best.value;
    ev.kind = OptimumKind::Interior;
    ev.w = best.x.head(d);
    ev.u = best.x[d];
  } else if (upper >= lower) {
    ev.value = upper;
    ev.kind = OptimumKind::UpperLimit;
    ev.w = Vec::Zero(d);
    ev.u = 1.0;
  } else {
    ev.value = lower;
    ev.kind = OptimumKind::LowerLimit;
    ev.w = v;
    ev.u = 0.0;
  }
  ev.gap = ev.value - k * g1;
  return ev;
}

double intermittency_gap(const GammaTable& table, const Vec& v, int k) {
  if (k < 1) throw DomainError("gamma order must be at least 1");
  if (k == 1) return 0.0;
  const GammaEvaluation ev = table.evaluate(k, v);
  const double gap = ev.value - k * table.evaluate(1, v).value;
  return std::abs(gap) < 1e-6 ? 0.0 : gap;
}

std::vector<RegionReport> region_scan(const GammaTable& table, std::span<const Vec> velocities) {
  const int max_k = table.max_order();
  const size_t n = velocities.size();
  std::vector<std::vector<GammaEvaluation>> evals(static_cast<size_t>(max_k), std::vector<GammaEvaluation>(n));
  for (int k = 1; k <= max_k; ++k) {
    parallel_for(
        n, [&](size_t i) { evals[static_cast<size_t>(k - 1)][i] = table.evaluate(k, velocities[i]); },
        table.options().threads);
  }
  std::vector<size_t> by_distance(n);
  std::iota(by_distance.begin(), by_distance.end(), size_t{0});
  std::stable_sort(by_distance.begin(), by_distance.end(), [&](size_t a, size_t b) {
    return (velocities[a] - table.vbar()).norm() < (velocities[b] - table.vbar()).norm();
  });

  std::vector<RegionReport> out;
  for (int k = 1; k <= max_k; ++k) {
    RegionReport rep;
    rep.order = k;
    rep.tolerance = 1e-5 * std::max(1.0, k * table.mu0());
    rep.velocities.assign(velocities.begin(), velocities.end());
    for (size_t i = 0; i < n; ++i) {
      const double g1 = evals[0][i].value;
      const double gk = evals[static_cast<size_t>(k - 1)][i].value;
      const double gap = gk - k * g1;
      rep.gamma.push_back(gk);
      rep.gap.push_back(gap);
      rep.member.push_back(g1 >= 0.0 && gap < rep.tolerance ? 1 : 0);
    }
    double first_out = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i)
      if (!rep.member[i]) first_out = std::min(first_out, (velocities[i] - table.vbar()).norm());
    for (size_t i = 0; i < n; ++i) {
      if (!rep.member[i]) continue;
      const double r = (velocities[i] - table.vbar()).norm();
      if (r < first_out - 1e-12) rep.inner_radius = std::max(rep.inner_radius, r);
      rep.outer_radius = std::max(rep.outer_radius, r);
    }
    rep.contains_vbar = n > 0 && rep.member[by_distance.front()];
    if (k > 1) {
      const auto& prev = out.back().member;
      for (size_t i = 0; i < n; ++i)
        if (rep.member[i] && !prev[i]) ++rep.nesting_violations;
    }
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace perbranch
