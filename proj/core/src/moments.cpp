// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "perbranch/trig_interpolant.hpp"

namespace perbranch {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

// alpha * sum_{i=1}^{k-1} C(k,i) m_i m_{k-i}; m[j] holds order j + 1.
GridFunction product_source(const GridFunction& alpha, const std::vector<GridFunction>& m, int k) {
  GridFunction s = GridFunction::Zero(alpha.size());
  for (int i = 1; i <= k / 2; ++i) {
    const int j = k - i;
    const double w = binomial(k, i) * (i == j ? 1.0 : 2.0);
    s.array() += w * m[static_cast<size_t>(i - 1)].array() * m[static_cast<size_t>(j - 1)].array();
  }
  return s.cwiseProduct(alpha);
}

double max_drift(const MediaSpec& media) {
  const TorusGrid probe(media.dim(), 32);
  double b = 0.0;
  for (int i = 0; i < media.dim(); ++i) b = std::max(b, sample_field(media.drift(i), probe).cwiseAbs().maxCoeff());
  return b;
}

double max_diffusion(const MediaSpec& media) {
  const TorusGrid probe(media.dim(), 32);
  double a = 0.0;
  for (int i = 0; i < media.dim(); ++i) a = std::max(a, sample_field(media.diffusion(i, i), probe).maxCoeff());
  return a;
}

GridFunction cube_indicator(const TorusGrid& grid, const Vec& corner) {
  GridFunction chi(grid.size());
  const double slack = 1e-9 * grid.spacing();
  for (Index n = 0; n < grid.size(); ++n) {
    const auto x = grid.coords(n);
    bool inside = true;
    for (int j = 0; j < grid.dim(); ++j) {
      const double rel = x[static_cast<size_t>(j)] - corner[j];
      inside = inside && rel >= -slack && rel < 1.0 - slack;
    }
    chi[n] = inside ? 1.0 : 0.0;
  }
  return chi;
}

// Weights of the hat functions of one axis integrated over [lo, lo + 1];
// returns (first node, weights) with nodes in axis coordinates i/n + origin.
std::pair<long, std::vector<double>> hat_weights(const TorusGrid& grid, double lo) {
  const double h = grid.spacing();
  const double hi = lo + 1.0;
  const long first = static_cast<long>(std::floor((lo - grid.origin()) / h)) - 1;
  const long last = static_cast<long>(std::ceil((hi - grid.origin()) / h)) + 1;
  std::vector<double> w;
  for (long i = first; i <= last; ++i) {
    const double xi = grid.origin() + static_cast<double>(i) * h;
    // integral over [lo, hi] of max(0, 1 - |s - xi| / h)
    double total = 0.0;
    const double a0 = std::max(lo, xi - h), a1 = std::min(hi, xi);
    if (a1 > a0) {
      const double f0 = 1.0 - (xi - a0) / h, f1 = 1.0 - (xi - a1) / h;
      total += 0.5 * (f0 + f1) * (a1 - a0);
    }
    const double b0 = std::max(lo, xi), b1 = std::min(hi, xi + h);
    if (b1 > b0) {
      const double f0 = 1.0 - (b0 - xi) / h, f1 = 1.0 - (b1 - xi) / h;
      total += 0.5 * (f0 + f1) * (b1 - b0);
    }
    w.push_back(total);
  }
  return {first, std::move(w)};
}

Index wrap_axis(long i, int n_axis) {
  long r = i % n_axis;
  if (r < 0) r += n_axis;
  return static_cast<Index>(r);
}

Vec reduce_mod1(const Vec& x) {
  Vec r = x;
  for (Index i = 0; i < r.size(); ++i) {
    r[i] -= std::floor(r[i]);
    if (r[i] >= 1.0) r[i] = 0.0;
  }
  return r;
}

int default_total_nodes(int dim) { return dim == 1 ? 256 : 32; }
int default_cube_nodes(int dim) { return dim == 1 ? 64 : 16; }

void check_times(std::span<const double> times) {
  double prev = 0.0;
  for (double t : times) {
    if (!(t >= prev)) throw DomainError("sample times must be nondecreasing and nonnegative");
    prev = t;
  }
}

}  // namespace

double MomentField::at(std::size_t sample, const Vec& x) const {
  if (sample >= values.size()) throw DomainError("sample index out of range");
  const Vec p = target.kind == MomentTarget::Kind::Total ? reduce_mod1(x) : x;
  return values[sample][grid.node_at(std::span<const double>(p.data(), static_cast<size_t>(p.size())))];
}

TorusGrid window_grid(const MediaSpec& media, int nodes_per_unit, double horizon, double lo, double hi) {
  const double spread = max_drift(media) * horizon + 7.0 * std::sqrt(max_diffusion(media) * horizon) + 2.0;
  const int origin = static_cast<int>(std::floor(lo - spread));
  const int end = static_cast<int>(std::ceil(hi + spread)) + 1;
  return TorusGrid(media.dim(), nodes_per_unit, end - origin, origin);
}

std::vector<MomentField> solve_moment_hierarchy(const MediaPtr& media, const MomentTarget& target, int max_order,
                                                std::span<const double> times, const MomentOptions& options) {
  if (!media) throw ConfigError("moment hierarchy needs a medium");
  if (max_order < 1) throw DomainError("moment order must be at least 1");
  if (!(options.dt > 0.0)) throw DomainError("time step must be positive");
  check_times(times);
  const int d = media->dim();
  const bool cube = target.kind == MomentTarget::Kind::Cube;
  if (cube && target.corner.size() != d) throw DomainError("cube corner dimension does not match media");
  const double horizon = times.empty() ? 0.0 : times.back();

  TorusGrid grid;
  if (cube) {
    const int n = options.nodes_per_unit > 0 ? options.nodes_per_unit : default_cube_nodes(d);
    if (options.window_periods > 0) {
      const double mid = 0.5 * (target.corner.minCoeff() + 0.5);
      const int origin = static_cast<int>(std::floor(mid)) - options.window_periods / 2;
      grid = TorusGrid(d, n, options.window_periods, origin);
    } else {
      grid = window_grid(*media, n, horizon, std::min(0.0, target.corner.minCoeff()),
                         std::max(1.0, target.corner.maxCoeff() + 1.0));
    }
  } else {
    grid = TorusGrid(d, options.nodes_per_unit > 0 ? options.nodes_per_unit : default_total_nodes(d));
  }

  const TiltedOperator op = assemble_tilted(media, grid, Vec::Zero(d));
  const GridFunction alpha = sample_field(media->branching(), grid);
  const double growth = std::max(op.max_row_sum(), 0.0) + 1.0;
  const double alpha_max = std::max(1.0, alpha.maxCoeff());

  std::vector<GridFunction> m(static_cast<size_t>(max_order), GridFunction::Zero(grid.size()));
  m[0] = cube ? cube_indicator(grid, target.corner) : GridFunction::Ones(grid.size());
  std::vector<GridFunction> s_old(static_cast<size_t>(max_order));
  for (int k = 2; k <= max_order; ++k) s_old[static_cast<size_t>(k - 1)] = product_source(alpha, m, k);

  std::vector<MomentField> out(static_cast<size_t>(max_order));
  for (int k = 1; k <= max_order; ++k) {
    auto& f = out[static_cast<size_t>(k - 1)];
    f.order = k;
    f.target = target;
    f.grid = grid;
    f.times.assign(times.begin(), times.end());
    f.media_hash = media->hash();
    f.min_value = std::numeric_limits<double>::infinity();
  }
  auto record = [&] {
    for (int k = 1; k <= max_order; ++k) {
      auto& f = out[static_cast<size_t>(k - 1)];
      f.values.push_back(m[static_cast<size_t>(k - 1)]);
      f.min_value = std::min(f.min_value, m[static_cast<size_t>(k - 1)].minCoeff());
    }
  };

  std::map<long long, CrankNicolson> steppers;
  int half_steps_left = cube ? options.rannacher_half_steps : 0;
  double t = 0.0;
  for (double sample : times) {
    const double span = sample - t;
    if (span > 1e-14) {
      const long steps = std::max(1L, std::lround(std::ceil(span / options.dt - 1e-9)));
      const double dt = span / static_cast<double>(steps);
      const long long key = std::llround(dt * 1e15);
      auto it = steppers.find(key);
      if (it == steppers.end()) it = steppers.try_emplace(key, op.matrix(), dt).first;
      const CrankNicolson& cn = it->second;
      for (long s = 0; s < steps; ++s) {
        if (half_steps_left >= 2) {
          for (int half = 0; half < 2; ++half) {
            cn.half_implicit_step(m[0]);
            for (int k = 2; k <= max_order; ++k) {
              const GridFunction src = product_source(alpha, m, k);
              cn.half_implicit_step(m[static_cast<size_t>(k - 1)], &src);
              s_old[static_cast<size_t>(k - 1)] = src;
            }
          }
          half_steps_left -= 2;
        } else {
          cn.step(m[0]);
          for (int k = 2; k <= max_order; ++k) {
            auto& so = s_old[static_cast<size_t>(k - 1)];
            if (options.coupling == SourceCoupling::Lagged) {
              cn.step(m[static_cast<size_t>(k - 1)], so, so);
              // lower orders are already at the new level; the lagged source
              // for the next step is evaluated there
              so = product_source(alpha, m, k);
            } else {
              const GridFunction s_new = product_source(alpha, m, k);
              cn.step(m[static_cast<size_t>(k - 1)], so, s_new);
              so = s_new;
            }
          }
        }
        if ((s & 63) == 63 || s == steps - 1) {
          const double tt = t + static_cast<double>(s + 1) * dt;
          for (int k = 1; k <= max_order; ++k) {
            const double norm = m[static_cast<size_t>(k - 1)].lpNorm<Eigen::Infinity>();
            const double envelope = 1e3 * factorial(k) * std::pow(alpha_max, k) * std::exp(k * growth * tt);
            if (!std::isfinite(norm) || norm > envelope) {
              std::ostringstream os;
              os << "moment of order " << k << " exceeded its growth envelope at t=" << tt << " (norm " << norm << ")";
              throw InstabilityError(os.str());
            }
          }
        }
      }
      t = sample;
    }
    record();
  }
  for (auto& f : out)
    if (f.values.empty()) f.min_value = 0.0;
  return out;
}

MomentField solve_mk(const MediaPtr& media, const MomentTarget& target, int k, std::span<const double> times,
                     const MomentOptions& options) {
  auto all = solve_moment_hierarchy(media, target, k, times, options);
  return std::move(all.back());
}

std::uint64_t stirling2(int k, int i) {
  if (k < 1 || k > 25 || i < 1 || i > k) {
    std::ostringstream os;
    os << "Stirling number S(" << k << "," << i << ") out of range";
    throw DomainError(os.str());
  }
  std::vector<std::uint64_t> row{1};  // S(0, 0)
  for (int n = 1; n <= k; ++n) {
    std::vector<std::uint64_t> next(static_cast<size_t>(n + 1), 0);
    for (int j = 1; j <= n; ++j) {
      const std::uint64_t keep = j < static_cast<int>(row.size()) ? row[static_cast<size_t>(j)] : 0;
      next[static_cast<size_t>(j)] = static_cast<std::uint64_t>(j) * keep + row[static_cast<size_t>(j - 1)];
    }
    row = std::move(next);
  }
  return row[static_cast<size_t>(i)];
}

std::vector<GridFunction> assemble_raw_moment(std::span<const MomentField> fields, int k) {
  if (k < 1 || static_cast<int>(fields.size()) < k) throw DomainError("raw moment needs fields of orders 1..k");
  const MomentField& first = fields[0];
  for (int i = 1; i <= k; ++i) {
    const MomentField& f = fields[static_cast<size_t>(i - 1)];
    if (f.order != i) throw DomainError("fields must be ordered by moment order starting at 1");
    if (f.times != first.times || !(f.grid == first.grid) || f.values.size() != first.values.size())
      throw DomainError("moment fields are sampled on different time or space grids");
  }
  std::vector<GridFunction> out;
  for (std::size_t s = 0; s < first.values.size(); ++s) {
    GridFunction acc = GridFunction::Zero(first.grid.size());
    for (int i = 1; i <= k; ++i)
      acc += static_cast<double>(stirling2(k, i)) * fields[static_cast<size_t>(i - 1)].values[s];
    out.push_back(std::move(acc));
  }
  return out;
}

GridFunction fk_source(const MediaSpec& media, const FkTable& table, int k) {
  if (k < 2 || k > table.max_order + 1) throw DomainError("source order out of range");
  return product_source(sample_field(media.branching(), table.grid), table.f, k);
}

FkTable total_moment_fk(const MediaPtr& media, int max_order, const FkOptions& options) {
  if (!media) throw ConfigError("f_k table needs a medium");
  if (max_order < 1) throw DomainError("moment order must be at least 1");
  const int d = media->dim();
  const TorusGrid grid(d, options.nodes_per_unit > 0 ? options.nodes_per_unit : default_total_nodes(d));
  const TiltedOperator op = assemble_tilted(media, grid, Vec::Zero(d));
  const SpectralTriple triple = principal_eigen(op, options.eigen);
  if (!(triple.eigenvalue > 0.0)) {
    std::ostringstream os;
    os << "media is not supercritical (mu(0) = " << triple.eigenvalue << ")";
    throw DomainError(os.str());
  }
  FkTable table;
  table.max_order = max_order;
  table.grid = grid;
  table.mu = triple.eigenvalue;
  table.c0 = triple.right.maxCoeff() / triple.right.minCoeff();
  table.media_hash = media->hash();
  table.f.push_back(triple.right);
  table.horizon.push_back(0.0);
  table.tail.push_back(0.0);

  const GridFunction alpha = sample_field(media->branching(), grid);
  const Index n = grid.size();
  for (int k = 2; k <= max_order; ++k) {
    const GridFunction source = product_source(alpha, table.f, k);
    SparseMatrix shifted = op.matrix();
    for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= k * table.mu;
    const CrankNicolson cn(shifted, options.dt);
    GridFunction w = source;
    GridFunction acc = (0.5 * options.dt) * w;
    const long check_every = std::max(1L, std::lround(1.0 / options.dt));
    double horizon = 0.0;
    double tail = std::numeric_limits<double>::infinity();
    for (long step = 1;; ++step) {
      cn.step(w);
      acc += options.dt * w;
      horizon = static_cast<double>(step) * options.dt;
      if (step % check_every == 0) {
        if (!w.allFinite()) throw InstabilityError("f_k integrand became non-finite");
        tail = table.c0 * w.lpNorm<Eigen::Infinity>() / ((k - 1) * table.mu);
        if (tail < options.tail_tolerance) break;
        if (horizon >= options.max_horizon) {
          std::ostringstream os;
          os << "f_" << k << " horizon cap " << options.max_horizon << " reached (tail " << tail << ")";
          throw ConvergenceError(os.str());
        }
      }
    }
    acc -= (0.5 * options.dt) * w;
    table.f.push_back(std::move(acc));
    table.horizon.push_back(horizon);
    table.tail.push_back(tail);
  }
  for (int k = 1; k <= max_order; ++k) {
    const GridFunction& fk = table.f[static_cast<size_t>(k - 1)];
    if (!(fk.minCoeff() > 0.0)) {
      std::ostringstream os;
      os << "f_" << k << " is not positive (min " << fk.minCoeff() << ")";
      throw ConvergenceError(os.str());
    }
    table.growth_constant = std::max(table.growth_constant, std::pow(fk.maxCoeff() / factorial(k), 1.0 / k));
  }
  return table;
}

std::vector<GridFunction> first_moment_transient(const MediaPtr& media, std::span<const double> times,
                                                 const FkOptions& options) {
  if (!media) throw ConfigError("transient needs a medium");
  check_times(times);
  const int d = media->dim();
  const TorusGrid grid(d, options.nodes_per_unit > 0 ? options.nodes_per_unit : default_total_nodes(d));
  const TiltedOperator op = assemble_tilted(media, grid, Vec::Zero(d));
  const SpectralTriple triple = principal_eigen(op, options.eigen);
  SparseMatrix shifted = op.matrix();
  for (Index i = 0; i < grid.size(); ++i) shifted.coeffRef(i, i) -= triple.eigenvalue;
  const GridFunction& phi = triple.right;
  const GridFunction& phi_adj = triple.left;
  auto deflate = [&](GridFunction& q) { q -= grid_inner(grid, q, phi_adj) * phi; };

  GridFunction q = GridFunction::Ones(grid.size()) - phi;
  deflate(q);
  std::vector<GridFunction> out;
  std::optional<CrankNicolson> cn;
  double t = 0.0;
  for (double sample : times) {
    const double span = sample - t;
    if (span > 1e-14) {
      const long steps = std::max(1L, std::lround(std::ceil(span / options.dt - 1e-9)));
      const double dt = span / static_cast<double>(steps);
      if (!cn || std::abs(cn->dt() - dt) > 1e-15 * dt) cn.emplace(shifted, dt);
      for (long s = 0; s < steps; ++s) {
        cn->step(q);
        deflate(q);
      }
      t = sample;
    }
    out.push_back(q);
  }
  return out;
}

std::vector<GridFunction> kernel_from(const MediaPtr& media, const TorusGrid& window, const Vec& x,
                                      std::span<const double> times, const EvolveOptions& options) {
  const Index node = window.node_at(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
  const TiltedOperator op = assemble_tilted(media, window, Vec::Zero(media->dim())).transposed();
  return evolve_semigroup(op, discrete_delta(window, node), times, options);
}

double cube_integral(const TorusGrid& grid, const GridFunction& f, const Vec& corner) {
  if (corner.size() != grid.dim()) throw DomainError("cube corner dimension does not match grid");
  const int n_axis = grid.nodes_per_axis();
  const auto [i0, wx] = hat_weights(grid, corner[0]);
  if (grid.dim() == 1) {
    double s = 0.0;
    for (std::size_t a = 0; a < wx.size(); ++a) s += wx[a] * f[wrap_axis(i0 + static_cast<long>(a), n_axis)];
    return s;
  }
  const auto [j0, wy] = hat_weights(grid, corner[1]);
  double s = 0.0;
  for (std::size_t a = 0; a < wx.size(); ++a)
    for (std::size_t b = 0; b < wy.size(); ++b)
      s += wx[a] * wy[b] *
           f[grid.node({static_cast<int>(wrap_axis(i0 + static_cast<long>(a), n_axis)),
                        static_cast<int>(wrap_axis(j0 + static_cast<long>(b), n_axis))})];
  return s;
}

std::vector<LocalLimitRow> check_local_limit(const RateProfile& profile, int k, const std::function<Vec(double)>& path,
                                             const Vec& x, std::span<const double> times,
                                             const LocalLimitOptions& options) {
  if (k < 1) throw DomainError("moment order must be at least 1");
  check_times(times);
  const MediaPtr& media = profile.media();
  const int d = profile.dim();
  if (x.size() != d) throw DomainError("x dimension does not match media");
  const Vec vbar = profile.vbar();

  double target = 0.0;
  if (k == 1) {
    target = TrigInterpolant(profile.grid(), profile.triple0().right)(x);
  } else {
    FkOptions fo;
    fo.nodes_per_unit = profile.grid().nodes_per_unit();
    fo.eigen = profile.options().eigen;
    const FkTable table = total_moment_fk(media, k, fo);
    target = TrigInterpolant(table.grid, table[k])(x);
  }

  std::vector<LocalLimitRow> rows;
  for (double t : times) {
    LocalLimitRow row;
    row.t = t;
    row.y = path(t);
    if (row.y.size() != d) throw DomainError("path dimension does not match media");
    row.corner = row.y + vbar * t;
    row.normalizer = front_normalizer(profile, t, row.y);
    row.target = target;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return rows;

  if (k == 1) {
    double lo = x.minCoeff(), hi = x.maxCoeff();
    for (const auto& r : rows) {
      lo = std::min(lo, r.corner.minCoeff());
      hi = std::max(hi, r.corner.maxCoeff() + 1.0);
    }
    const TorusGrid window = options.window_periods > 0
                                 ? TorusGrid(d, options.nodes_per_unit, options.window_periods,
                                             static_cast<int>(std::floor(0.5 * (lo + hi))) - options.window_periods / 2)
                                 : window_grid(*media, options.nodes_per_unit, times.back(), lo, hi);
    EvolveOptions eo;
    eo.dt = options.dt;
    eo.rannacher_half_steps = options.rannacher_half_steps;
    const auto kernels = kernel_from(media, window, x, times, eo);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].moment = cube_integral(window, kernels[i], rows[i].corner);
  } else {
    MomentOptions mo;
    mo.nodes_per_unit = options.nodes_per_unit;
    mo.window_periods = options.window_periods;
    mo.dt = options.dt;
    mo.rannacher_half_steps = options.rannacher_half_steps;
    for (auto& row : rows) {
      const double tt = row.t;
      const auto fields = solve_moment_hierarchy(media, MomentTarget::cube(row.corner), k, std::span(&tt, 1), mo);
      const auto raw = assemble_raw_moment(fields, k);
      row.moment = raw[0][fields[0].grid.node_at(std::span<const double>(x.data(), static_cast<size_t>(d)))];
    }
  }
  for (auto& row : rows) {
    row.ratio = row.moment / std::pow(row.normalizer, k);
    row.deviation = std::abs(row.ratio - row.target);
  }
  return rows;
}

}  // namespace perbranch
