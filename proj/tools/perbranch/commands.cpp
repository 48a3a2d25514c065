// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "perbranch/branching_sim.hpp"
#include "perbranch/homogenization.hpp"
#include "perbranch/intermittency.hpp"
#include "perbranch/moments.hpp"
#include "perbranch/parallel.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/torus_spectral.hpp"

namespace perbranch::cli {
namespace {

using nlohmann::json;

int nodes_or(const Common& common, int fallback) { return common.grid > 0 ? common.grid : fallback; }

std::vector<std::string> vec_cells(const Vec& v) {
  std::vector<std::string> out;
  for (Index i = 0; i < v.size(); ++i) out.push_back(num(v[i]));
  return out;
}

std::vector<std::string> vec_header(const std::string& name, int dim) {
  if (dim == 1) return {name};
  return {name + "_1", name + "_2"};
}

template <class... Parts>
std::vector<std::string> join(Parts&&... parts) {
  std::vector<std::string> out;
  (out.insert(out.end(), parts.begin(), parts.end()), ...);
  return out;
}

std::vector<Vec> points_from(const std::vector<std::string>& list, const std::string& range, int dim,
                             const char* what, const std::string& fallback) {
  if (!list.empty() && !range.empty()) throw ConfigError(std::string("give either a ") + what + " list or a range");
  if (!list.empty()) return parse_vectors(list, dim, what);
  return parse_range(range.empty() ? fallback : range, dim, what);
}

json points_json(const std::vector<Vec>& points) {
  json j = json::array();
  for (const auto& p : points) j.push_back(to_json(p));
  return j;
}

RateOptions rate_options(const Common& common) {
  RateOptions o;
  o.nodes_per_unit = common.grid;
  return o;
}

}  // namespace

MediaPtr load_media(const std::string& path, json* document) {
  if (path.empty()) throw ConfigError("--media is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open media file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (document) *document = doc;
  if (doc.is_object() && doc.contains("media")) return media_from_json(doc["media"]);
  return media_from_json(doc);
}

RunContext make_context(const Common& common, const char* command, MediaPtr media) {
  RunContext ctx;
  ctx.command = command;
  ctx.media = std::move(media);
  ctx.out_dir = common.out_dir;
  ctx.argv = common.argv;
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (!std::filesystem::is_directory(ctx.out_dir)) throw ConfigError("output directory " + common.out_dir + " is not usable");
  ctx.parameters["grid"] = common.grid;
  if (common.seed) ctx.parameters["seed"] = *common.seed;
  return ctx;
}

int cmd_eig(const Common& common, const EigArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "eig", media);
  const auto tilts = points_from(args.tilts, args.range, d, "tilt", "-2:2:17");
  const TorusGrid grid(d, nodes_or(common, d == 1 ? 256 : 64));
  ctx.parameters["grid"] = grid.nodes_per_unit();
  ctx.parameters["tilts"] = points_json(tilts);
  ctx.parameters["dump"] = args.dump;

  std::vector<SpectralTriple> triples(tilts.size());
  parallel_for(
      tilts.size(), [&](std::size_t i) { triples[i] = principal_eigen(assemble_tilted(media, grid, tilts[i])); },
      common.threads);

  CsvFile csv(ctx.file("eig.csv"), join(vec_header("zeta", d), std::vector<std::string>{"mu", "residual",
                                                                                        "adjoint_residual", "iterations"}));
  for (const auto& t : triples)
    csv.row(join(vec_cells(t.tilt), std::vector<std::string>{num(t.eigenvalue), num(t.residual), num(t.adjoint_residual),
                                                             std::to_string(t.iterations)}));
  csv.close();

  json summary;
  if (d == 1 && tilts.size() >= 3) {
    // Convexity along the scan, meaningful for increasing tilts.
    double min_second = INFINITY;
    for (std::size_t i = 1; i + 1 < triples.size(); ++i)
      min_second = std::min(min_second,
                            triples[i + 1].eigenvalue - 2.0 * triples[i].eigenvalue + triples[i - 1].eigenvalue);
    summary["min_second_difference"] = min_second;
  }
  ctx.write_sidecar(csv.path(), summary);

  if (args.dump) {
    CsvFile dump(ctx.file("eigenfunctions.csv"),
                 join(std::vector<std::string>{"tilt_index", "node"}, vec_header("x", d),
                      std::vector<std::string>{"phi", "phi_adjoint"}));
    for (std::size_t i = 0; i < triples.size(); ++i)
      for (Index node = 0; node < grid.size(); ++node) {
        const auto c = grid.coords(node);
        std::vector<std::string> row{std::to_string(i), std::to_string(node), num(c[0])};
        if (d == 2) row.push_back(num(c[1]));
        row.push_back(num(triples[i].right[node]));
        row.push_back(num(triples[i].left[node]));
        dump.row(row);
      }
    dump.close();
    ctx.write_sidecar(dump.path());
  }
  return 0;
}

int cmd_rate(const Common& common, const RateArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "rate", media);
  const auto velocities = points_from(args.velocities, args.range, d, "velocity", "-2:2:17");
  const RateProfile profile(media, rate_options(common));
  ctx.parameters["grid"] = profile.grid().nodes_per_unit();
  ctx.parameters["velocities"] = points_json(velocities);

  std::vector<std::optional<LegendrePoint>> points(velocities.size());
  parallel_for(
      velocities.size(),
      [&](std::size_t i) {
        try {
          points[i] = legendre_transform(profile, velocities[i]);
        } catch (const DomainError&) {
          points[i].reset();
        }
      },
      common.threads);

  CsvFile csv(ctx.file("rate.csv"),
              join(vec_header("c", d), std::vector<std::string>{"Phi"}, vec_header("zeta", d),
                   std::vector<std::string>{"mu", "hessian_det", "gradient_residual", "status"}));
  int unreachable = 0;
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    if (points[i]) {
      const auto& p = *points[i];
      csv.row(join(vec_cells(velocities[i]), std::vector<std::string>{num(p.value)}, vec_cells(p.tilt),
                   std::vector<std::string>{num(p.mu), num(p.hessian_det), num(p.gradient_residual), "ok"}));
    } else {
      ++unreachable;
      csv.row(join(vec_cells(velocities[i]), std::vector<std::string>{"nan"}, vec_cells(Vec::Constant(d, NAN)),
                   std::vector<std::string>{"nan", "nan", "nan", "unreachable"}));
    }
  }
  csv.close();
  json summary;
  summary["mu0"] = profile.mu0();
  summary["vbar"] = to_json(profile.vbar());
  summary["unreachable"] = unreachable;
  ctx.write_sidecar(csv.path(), summary);
  return 0;
}

int cmd_kernel(const Common& common, const KernelArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "kernel", media);
  auto times = parse_scalars(args.times, "time");
  std::sort(times.begin(), times.end());
  if (times.empty() || times.front() <= 0.0) throw ConfigError("kernel times must be positive");
  const auto ys = parse_vectors(args.ys, d, "y");
  const Vec x = args.x.empty() ? Vec::Zero(d) : parse_vector(args.x, d, "x");
  if (times.front() < 1.0)
    std::cerr << "warning: the asymptotic kernel is not accurate for t < 1 (smallest t = " << times.front() << ")\n";

  auto ro = rate_options(common);
  ro.t_min = std::min(ro.t_min, times.front());
  const RateProfile profile(media, ro);
  const int n = nodes_or(common, d == 1 ? 256 : 32);
  double lo = x.minCoeff(), hi = x.maxCoeff();
  for (const auto& y : ys) {
    lo = std::min(lo, y.minCoeff());
    hi = std::max(hi, y.maxCoeff());
  }
  const TorusGrid window = window_grid(*media, n, times.back(), std::floor(lo), std::ceil(hi));
  EvolveOptions eo;
  eo.dt = args.dt;
  eo.rannacher_half_steps = 4;
  const auto fields = kernel_from(media, window, x, times, eo);

  ctx.parameters["grid"] = n;
  ctx.parameters["times"] = times;
  ctx.parameters["ys"] = points_json(ys);
  ctx.parameters["x"] = to_json(x);
  ctx.parameters["dt"] = args.dt;
  ctx.parameters["window_periods"] = window.periods();
  ctx.parameters["window_origin"] = window.origin();

  CsvFile csv(ctx.file("kernel.csv"), join(std::vector<std::string>{"t"}, vec_header("y", d),
                                          std::vector<std::string>{"pde", "asymptotic", "ratio", "rate"}));
  for (std::size_t s = 0; s < times.size(); ++s)
    for (const auto& y : ys) {
      const Index node = window.node_at(std::span<const double>(y.data(), static_cast<std::size_t>(d)));
      const auto a = kernel_asymptotic(profile, times[s], x, y);
      const double pde = fields[s][node];
      csv.row(join(std::vector<std::string>{num(times[s])}, vec_cells(y),
                   std::vector<std::string>{num(pde), num(a.value), num(pde / a.value), num(a.rate)}));
    }
  csv.close();
  ctx.write_sidecar(csv.path());
  return 0;
}

int cmd_homog(const Common& common, const HomogArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "homog", media);
  const auto tilts = args.range.empty() ? parse_vectors(args.tilts, d, "tilt") : parse_range(args.range, d, "tilt");
  const TorusGrid grid(d, nodes_or(common, d == 1 ? 256 : 64));
  ctx.parameters["grid"] = grid.nodes_per_unit();
  ctx.parameters["tilts"] = points_json(tilts);

  struct Row {
    SpectralTriple triple;
    CellSolution cell;
    Mat xi;
  };
  std::vector<Row> rows(tilts.size());
  parallel_for(
      tilts.size(),
      [&](std::size_t i) {
        rows[i].triple = principal_eigen(assemble_tilted(media, grid, tilts[i]));
        rows[i].cell = solve_cell_problem(media, rows[i].triple);
        rows[i].xi = effective_diffusivity(rows[i].cell);
      },
      common.threads);

  std::vector<std::string> xi_head;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) xi_head.push_back("xi_" + std::to_string(i) + std::to_string(j));
  CsvFile csv(ctx.file("homog.csv"),
              join(vec_header("zeta", d), std::vector<std::string>{"mu"}, vec_header("ell", d), xi_head,
                   std::vector<std::string>{"cell_residual", "solvability_residual"}));
  for (const auto& r : rows) {
    std::vector<std::string> xi;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) xi.push_back(num(r.xi(i, j)));
    csv.row(join(vec_cells(r.triple.tilt), std::vector<std::string>{num(r.triple.eigenvalue)},
                 vec_cells(r.cell.effective_drift), xi,
                 std::vector<std::string>{num(r.cell.cell_residual),
                                          num(r.cell.solvability_residual.cwiseAbs().maxCoeff())}));
  }
  csv.close();
  ctx.write_sidecar(csv.path());
  return 0;
}

int cmd_moments(const Common& common, const MomentsArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "moments", media);
  if (args.max_order < 1) throw ConfigError("--K must be at least 1");
  if (!(args.horizon > 0.0) || args.samples < 1) throw ConfigError("--T and --samples must be positive");
  std::vector<double> times;
  for (int i = 0; i <= args.samples; ++i) times.push_back(args.horizon * i / args.samples);

  MomentOptions mo;
  mo.nodes_per_unit = common.grid;
  mo.dt = args.dt;
  if (args.coupling == "lagged") {
    mo.coupling = SourceCoupling::Lagged;
  } else if (args.coupling != "trapezoidal") {
    throw ConfigError("--coupling must be trapezoidal or lagged");
  }
  const MomentTarget target =
      args.corner.empty() ? MomentTarget::total() : MomentTarget::cube(parse_vector(args.corner, d, "corner"));
  const auto fields = solve_moment_hierarchy(media, target, args.max_order, times, mo);

  ctx.parameters["K"] = args.max_order;
  ctx.parameters["T"] = args.horizon;
  ctx.parameters["samples"] = args.samples;
  ctx.parameters["dt"] = args.dt;
  ctx.parameters["coupling"] = args.coupling;
  ctx.parameters["target"] = args.corner.empty() ? json("total") : to_json(target.corner);
  ctx.parameters["grid"] = fields.front().grid.nodes_per_unit();

  const bool total = target.kind == MomentTarget::Kind::Total;
  std::optional<FkTable> fk;
  double mu = 0.0;
  if (total) {
    FkOptions fo;
    fo.nodes_per_unit = fields.front().grid.nodes_per_unit();
    fo.dt = args.dt;
    const TorusGrid grid(d, fo.nodes_per_unit);
    mu = principal_eigen(assemble_tilted(media, grid, Vec::Zero(d)), fo.eigen).eigenvalue;
    if (mu > 0.0) {
      fk = total_moment_fk(media, args.max_order, fo);
    } else {
      std::cerr << "warning: mu(0) = " << mu << " is not positive; no f_k table\n";
    }
  }

  const auto& grid = fields.front().grid;
  CsvFile csv(ctx.file("moments.csv"), join(std::vector<std::string>{"t", "k", "node"}, vec_header("x", d),
                                           std::vector<std::string>{"m", "normalized"}));
  for (std::size_t s = 0; s < times.size(); ++s)
    for (const auto& f : fields)
      for (Index node = 0; node < grid.size(); ++node) {
        const auto c = grid.coords(node);
        std::vector<std::string> row{num(times[s]), std::to_string(f.order), std::to_string(node), num(c[0])};
        if (d == 2) row.push_back(num(c[1]));
        const double m = f.values[s][node];
        row.push_back(num(m));
        row.push_back(total ? num(m * std::exp(-f.order * mu * times[s])) : "nan");
        csv.row(row);
      }
  csv.close();
  json summary;
  summary["mu0"] = mu;
  double min_value = INFINITY;
  for (const auto& f : fields) min_value = std::min(min_value, f.min_value);
  summary["min_value"] = min_value;
  ctx.write_sidecar(csv.path(), summary);

  if (fk) {
    CsvFile table(ctx.file("fk.csv"), join(std::vector<std::string>{"k", "node"}, vec_header("x", d),
                                          std::vector<std::string>{"f"}));
    for (int k = 1; k <= fk->max_order; ++k)
      for (Index node = 0; node < fk->grid.size(); ++node) {
        const auto c = fk->grid.coords(node);
        std::vector<std::string> row{std::to_string(k), std::to_string(node), num(c[0])};
        if (d == 2) row.push_back(num(c[1]));
        row.push_back(num((*fk)[k][node]));
        table.row(row);
      }
    table.close();
    json fs;
    fs["mu"] = fk->mu;
    fs["c0"] = fk->c0;
    fs["horizon"] = fk->horizon;
    fs["tail"] = fk->tail;
    fs["growth_constant"] = fk->growth_constant;
    ctx.write_sidecar(table.path(), fs);
  }
  return 0;
}

int cmd_gamma(const Common& common, const GammaArgs& args) {
  auto media = load_media(common.media_path);
  const int d = media->dim();
  auto ctx = make_context(common, "gamma", media);
  if (args.max_order < 1) throw ConfigError("--K must be at least 1");
  if (!(args.hi > args.lo) || args.points < 3) throw ConfigError("velocity box needs lo < hi and at least 3 points");
  auto profile = std::make_shared<const RateProfile>(media, rate_options(common));
  GammaOptions go;
  go.threads = common.threads;
  const auto table = GammaTable::build(profile, VelocityGrid::box(d, args.lo, args.hi, args.points), args.max_order, go);
  ctx.parameters["grid"] = profile->grid().nodes_per_unit();
  ctx.parameters["K"] = args.max_order;
  ctx.parameters["vmin"] = args.lo;
  ctx.parameters["vmax"] = args.hi;
  ctx.parameters["points"] = args.points;

  const auto& vg = table.grid();
  CsvFile csv(ctx.file("gamma.csv"), join(vec_header("v", d), std::vector<std::string>{"k", "gamma", "gap"},
                                         vec_header("w", d), std::vector<std::string>{"u", "optimum"}));
  for (Index node = 0; node < vg.size(); ++node)
    for (int k = 1; k <= table.max_order(); ++k) {
      const auto& e = table.node_evaluation(k, node);
      csv.row(join(vec_cells(vg.point(node)), std::vector<std::string>{std::to_string(k), num(e.value), num(e.gap)},
                   vec_cells(e.w), std::vector<std::string>{num(e.u), to_string(e.kind)}));
    }
  csv.close();
  ctx.write_sidecar(csv.path());

  std::vector<Vec> velocities;
  for (Index node = 0; node < vg.size(); ++node) velocities.push_back(vg.point(node));
  const auto regions = region_scan(table, velocities);
  std::vector<std::string> head = vec_header("v", d);
  for (int k = 1; k <= table.max_order(); ++k) head.push_back("in_G" + std::to_string(k));
  CsvFile reg(ctx.file("regions.csv"), head);
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    auto row = vec_cells(velocities[i]);
    for (const auto& r : regions) row.push_back(r.member[i] ? "1" : "0");
    reg.row(row);
  }
  reg.close();
  json summary = json::array();
  for (const auto& r : regions)
    summary.push_back({{"order", r.order},
                       {"inner_radius", r.inner_radius},
                       {"outer_radius", r.outer_radius},
                       {"nesting_violations", r.nesting_violations},
                       {"contains_vbar", r.contains_vbar}});
  ctx.write_sidecar(reg.path(), {{"regions", summary}, {"mu0", table.mu0()}, {"vbar", to_json(table.vbar())}});
  return 0;
}

int cmd_sim(const Common& common, const SimArgs& args) {
  json doc;
  auto media = load_media(common.media_path, &doc);
  const int d = media->dim();
  auto ctx = make_context(common, "sim", media);
  json block = doc.is_object() && doc.contains("sim") ? doc["sim"] : json::object();
  if (args.replicas) block["replicas"] = *args.replicas;
  if (args.horizon) {
    block.erase("times");
    block["T"] = *args.horizon;
  }
  if (args.dt) block["dt"] = *args.dt;
  if (args.cap) block["cap"] = *args.cap;
  if (args.cap_override) block["cap_override"] = true;
  if (common.seed) block["seed"] = *common.seed;
  if (!args.x0.empty()) block["x0"] = to_json(parse_vector(args.x0, d, "x0"));
  if (!args.targets.empty()) {
    json t = json::array();
    for (const auto& y : parse_vectors(args.targets, d, "target")) t.push_back(to_json(y));
    block["targets"] = t;
  }
  auto config = sim_config_from_json(block, media);
  config.threads = common.threads;
  config.validate();
  ctx.parameters = {{"sim", block}};
  const auto stats = run_replicas(config);

  CsvFile csv(ctx.file("sim.csv"), {"t", "quantity", "target", "power", "mean", "variance", "se", "count", "censored"});
  auto emit = [&](double t, const std::string& quantity, const std::string& target, int power, const MomentEstimate& e) {
    csv.row({num(t), quantity, target, std::to_string(power), num(e.mean), num(e.variance), num(e.se),
             std::to_string(e.count), std::to_string(stats.censored)});
  };
  for (std::size_t s = 0; s < stats.times.size(); ++s) {
    for (int p = 0; p < 3; ++p) emit(stats.times[s], "N", "", p + 1, stats.total[s][static_cast<std::size_t>(p)]);
    for (std::size_t j = 0; j < stats.targets.size(); ++j) {
      std::ostringstream label;
      for (Index i = 0; i < d; ++i) label << (i ? ";" : "") << num(stats.targets[j][i]);
      for (int p = 0; p < 3; ++p)
        emit(stats.times[s], "n", label.str(), p + 1, stats.cube[j][s][static_cast<std::size_t>(p)]);
    }
    for (int i = 0; i < d; ++i) {
      emit(stats.times[s], "center", std::to_string(i + 1), 1, stats.center[s][static_cast<std::size_t>(i)]);
      emit(stats.times[s], "center_square", std::to_string(i + 1), 1,
           stats.center_square[s][static_cast<std::size_t>(i)]);
    }
  }
  csv.close();
  ctx.write_sidecar(csv.path(), {{"censored", stats.censored}, {"monotone_total", stats.monotone_total}});
  return 0;
}

}  // namespace perbranch::cli
