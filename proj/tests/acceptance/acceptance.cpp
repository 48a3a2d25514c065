// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/LU>

#include "perbranch/branching_sim.hpp"
#include "perbranch/homogenization.hpp"
#include "perbranch/intermittency.hpp"
#include "perbranch/moments.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/torus_spectral.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace perbranch;
namespace fs = std::filesystem;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// Collects the individual conditions of one criterion.
class Verdict {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool pass() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds, 0 for none
  std::function<void(Verdict&)> body;
};

// 1. Constant media against the quadratic closed forms.
void constant_media_closed_forms(Verdict& v) {
  double mu_err = 0.0, phi_err = 0.0, tilt_err = 0.0, vbar_err = 0.0;
  for (double b : {0.0, 0.7})
    for (double r : {0.0, 0.5}) {
      RateOptions o;
      o.nodes_per_unit = 256;
      const RateProfile profile(testing::constant_media(1.0, b, r), o);
      for (int i = -8; i <= 8; ++i) {
        const double z = 0.25 * i;
        mu_err = std::max(mu_err, std::abs(profile.mu(v1(z)) - (0.5 * z * z + b * z + r)));
      }
      for (double c : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0}) {
        const auto lp = legendre_transform(profile, v1(c));
        phi_err = std::max(phi_err, std::abs(lp.value - (0.5 * (c - b) * (c - b) - r)));
        tilt_err = std::max(tilt_err, std::abs(lp.tilt[0] - (c - b)));
      }
      vbar_err = std::max(vbar_err, std::abs(profile.vbar()[0] - b));
    }
  v.require(mu_err < 1e-6, "mu error " + sci(mu_err));
  v.require(phi_err < 1e-6, "Phi error " + sci(phi_err));
  v.require(tilt_err < 1e-6, "tilt error " + sci(tilt_err));
  v.require(vbar_err < 1e-6, "vbar error " + sci(vbar_err));
  v.note("max errors mu " + sci(mu_err) + ", Phi " + sci(phi_err) + ", tilt " + sci(tilt_err) + ", vbar " +
         sci(vbar_err));
}

// 2. Effective drift and diffusivity are the derivatives of mu on cosine media.
void derivative_identities(Verdict& v) {
  auto media = testing::cosine_media();
  const TorusGrid grid(1, 256);
  auto mu = [&](double z) { return principal_eigen(assemble_tilted(media, grid, v1(z))).eigenvalue; };
  double ell_err = 0.0, xi_err = 0.0, min_second = INFINITY;
  for (int i = -4; i <= 4; ++i) {
    const double z = 0.5 * i;
    const auto triple = principal_eigen(assemble_tilted(media, grid, v1(z)));
    const auto cell = solve_cell_problem(media, triple);
    const Mat xi = effective_diffusivity(cell);
    ell_err = std::max(ell_err, std::abs(cell.effective_drift[0] - testing::fd_first(mu, z, 1e-3)));
    const double second = testing::fd_second(mu, z, 1e-2);
    xi_err = std::max(xi_err, std::abs(xi(0, 0) - second));
    min_second = std::min(min_second, mu(z - 0.25) - 2.0 * mu(z) + mu(z + 0.25));
  }
  v.require(ell_err < 1e-5, "ell vs FD gradient " + sci(ell_err));
  v.require(xi_err < 1e-4, "Xi vs FD Hessian " + sci(xi_err));
  v.require(min_second > 0.0, "second difference " + sci(min_second));
  v.note("ell " + sci(ell_err) + ", Xi " + sci(xi_err) + ", min second difference " + sci(min_second));
}

// 3. Legendre duality and the Hessian identity over the tilt lattice.
void duality(Verdict& v) {
  double residual = 0.0, hessian = 0.0;
  auto run = [&](MediaPtr media, const std::vector<Vec>& tilts) {
    const RateProfile profile(std::move(media));
    for (const auto& z : tilts) {
      const auto sp = profile.evaluate(z);
      const auto lp = legendre_transform(profile, sp->ell);
      residual = std::max(residual, std::abs(lp.value - (z.dot(sp->ell) - sp->mu)));
      hessian = std::max(hessian, std::abs(lp.hessian_det * sp->xi.determinant() - 1.0));
    }
  };
  std::vector<Vec> lattice1, lattice2;
  for (int i = -4; i <= 4; ++i) lattice1.push_back(v1(0.5 * i));
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) lattice2.push_back((Vec(2) << i, j).finished());
  run(testing::cosine_media(), lattice1);
  run(testing::rough_media_2d(), lattice2);
  v.require(residual < 1e-9, "duality residual " + sci(residual));
  v.require(hessian < 1e-6, "Hessian product " + sci(hessian));
  v.note("duality residual " + sci(residual) + ", |det D2Phi det Xi - 1| " + sci(hessian) + " (d=1 and d=2)");
}

// 4. Time-stepped kernel against its large-time asymptotics.
void kernel_asymptotics(Verdict& v) {
  auto media = testing::cosine_media();
  const RateProfile profile(media);
  const std::vector<double> times{5.0, 10.0, 20.0};
  const Vec x = v1(0.0);
  const TorusGrid window = window_grid(*media, 256, times.back(), 0.0, 3.0);
  EvolveOptions eo;
  eo.dt = 1e-3;
  eo.rannacher_half_steps = 4;
  const auto fields = kernel_from(media, window, x, times, eo);
  for (int y = 0; y <= 3; ++y) {
    const Vec yy = v1(y);
    const Index node = window.node_at(std::span<const double>(yy.data(), 1));
    std::vector<double> dev;
    std::string row = "y=" + std::to_string(y) + ":";
    for (std::size_t s = 0; s < times.size(); ++s) {
      const double ratio = fields[s][node] / kernel_asymptotic(profile, times[s], x, yy).value;
      dev.push_back(std::abs(ratio - 1.0));
      row += " " + sci(ratio - 1.0);
    }
    v.require(dev[2] <= 0.1, "ratio at t=20, y=" + std::to_string(y) + " off by " + sci(dev[2]));
    v.require(dev[1] < dev[0] && dev[2] < dev[1], "deviation not decreasing at y=" + std::to_string(y));
    v.note("ratio - 1 at t = 5, 10, 20, " + row);
  }
}

// 5. Yule hierarchy: limits f_k = k! and the normalized moments at t = 8.
void yule_moments(Verdict& v) {
  auto media = testing::constant_media(1.0, 0.0, 1.0);
  FkOptions fo;
  fo.nodes_per_unit = 32;
  const auto fk = total_moment_fk(media, 5, fo);
  double limit_err = 0.0;
  double factorial = 1.0;
  for (int k = 1; k <= 5; ++k) {
    factorial *= k;
    limit_err = std::max(limit_err, (fk[k].array() - factorial).abs().maxCoeff());
  }
  v.require(limit_err < 1e-6, "f_k error " + sci(limit_err));

  const double t = 8.0;
  const std::vector<double> times{t};
  MomentOptions mo;
  mo.nodes_per_unit = 32;
  const auto fields = solve_moment_hierarchy(media, MomentTarget::total(), 5, times, mo);
  const Vec x = v1(0.0);
  double exact_err = 0.0;
  std::string literal;
  factorial = 1.0;
  for (int k = 1; k <= 5; ++k) {
    factorial *= k;
    const double m = fields[static_cast<std::size_t>(k - 1)].at(0, x);
    const double normalized = m * std::exp(-k * t);
    // finite-time factorial moment of the geometric law
    exact_err = std::max(exact_err, std::abs(m / testing::yule_factorial_moment(k, t) - 1.0));
    const double dev = std::abs(normalized - factorial);
    if (k == 2) v.require(dev < 1e-3, "m_2 e^{-2t} - f_2 = " + sci(dev));
    if (k >= 2) literal += " k=" + std::to_string(k) + ":" + sci(dev);
  }
  v.require(exact_err < 1e-3, "relative error against the exact transient " + sci(exact_err));
  v.note("f_k error " + sci(limit_err) + ", transient relative error " + sci(exact_err));
  v.note("|m_k e^{-kt} - k!| at t=8 (includes the exact finite-time term k!((1-e^{-t})^{k-1}-1)):" + literal);
}

// 6. Gamma recursion on the homogeneous medium r = 1.
void gamma_homogeneous(Verdict& v) {
  auto profile = std::make_shared<const RateProfile>(testing::constant_media(1.0, 0.0, 1.0));
  const auto table = GammaTable::build(profile, VelocityGrid::box(1, -3.0, 3.0, 121), 3);
  auto g1 = [](double w) { return 1.0 - 0.5 * w * w; };

  const double g05 = table.evaluate(2, v1(0.5)).value;
  const double g15 = table.evaluate(2, v1(1.5)).value;
  const double gap15 = intermittency_gap(table, v1(1.5), 2);
  const auto b05 = testing::brute_force_sup(g1, g1, 0.5, 4.0);
  const auto b15 = testing::brute_force_sup(g1, g1, 1.5, 4.0);
  v.require(std::abs(g05 - 1.75) < 1e-3, "gamma_2(0.5) = " + sci(g05));
  v.require(std::abs(g15) < 1e-3, "gamma_2(1.5) = " + sci(g15));
  v.require(std::abs(gap15 - 0.25) < 1e-3, "gap(1.5, 2) = " + sci(gap15));
  v.require(std::abs(g05 - b05.value) < 1e-3, "gamma_2(0.5) vs brute force " + sci(b05.value));
  v.require(std::abs(g15 - b15.value) < 1e-3, "gamma_2(1.5) vs brute force " + sci(b15.value));
  double closed = 0.0;
  for (double w = 1.05; w < 1.999; w += 0.05)
    for (double s : {-1.0, 1.0}) closed = std::max(closed, std::abs(table.eval(2, v1(s * w)) - (3.0 - 2.0 * w)));
  v.require(closed < 1e-3, "closed-form reduction off by " + sci(closed));

  std::vector<Vec> vs;
  for (Index i = 0; i < table.grid().size(); ++i) vs.push_back(table.grid().point(i));
  const auto regions = region_scan(table, vs);
  const double cell = table.grid().spacing(0);
  v.require(std::abs(regions[0].outer_radius - std::sqrt(2.0)) <= cell,
            "G_1 boundary at " + sci(regions[0].outer_radius));
  v.require(std::abs(regions[1].inner_radius - 1.0) <= cell, "G_2 inner radius " + sci(regions[1].inner_radius));
  v.note("gamma_2(0.5) " + sci(g05) + " (grid " + sci(b05.value) + "), gamma_2(1.5) " + sci(g15) + " (grid " +
         sci(b15.value) + "), gap " + sci(gap15) + ", closed form " + sci(closed));
  v.note("G_1 radius " + sci(regions[0].outer_radius) + ", G_2 inner radius " + sci(regions[1].inner_radius) +
         ", cell " + sci(cell));
}

// 7. Region properties on cosine media.
void gamma_cosine(Verdict& v) {
  auto profile = std::make_shared<const RateProfile>(testing::cosine_media());
  const double mu0 = profile->mu0();
  const auto table = GammaTable::build(profile, VelocityGrid::box(1, -2.0, 2.0, 41), 3);
  const auto& g = table.grid();
  int jensen = 0, cap = 0, radial = 0, monotone = 0;
  for (Index i = 0; i < g.size(); ++i) {
    const Vec w = g.point(i);
    for (int k = 1; k <= 3; ++k) {
      const double gk = table.node_value(k, i);
      if (gk < k * table.node_value(1, i) - 1e-8) ++jensen;
      if (gk > k * mu0 + 1e-8) ++cap;
      if (k > 1 && gk < table.node_value(k - 1, i) - 1e-8) ++monotone;
      for (double a : {0.25, 0.5, 0.75})
        if (gk > table.eval(k, table.vbar() + a * (w - table.vbar())) + 1e-6) ++radial;
    }
  }
  std::vector<Vec> vs;
  for (Index i = 0; i < g.size(); ++i) vs.push_back(g.point(i));
  int nesting = 0;
  for (const auto& r : region_scan(table, vs)) nesting += r.nesting_violations;
  v.require(jensen == 0, std::to_string(jensen) + " Jensen violations");
  v.require(cap == 0, std::to_string(cap) + " cap violations");
  v.require(radial == 0, std::to_string(radial) + " radial violations");
  v.require(monotone == 0, std::to_string(monotone) + " order violations");
  v.require(nesting == 0, std::to_string(nesting) + " nesting violations");
  v.note("violations: Jensen " + std::to_string(jensen) + ", cap " + std::to_string(cap) + ", radial " +
         std::to_string(radial) + ", order " + std::to_string(monotone) + ", nesting " + std::to_string(nesting));
}

// 8. Monte Carlo against the moment theory.
void monte_carlo(Verdict& v) {
  auto z_check = [&v](const std::string& label, const MomentEstimate& e, double scale, double expected) {
    const double z = (e.mean * scale - expected) / (e.se * scale);
    v.require(std::abs(z) <= 3.0, label + " z=" + sci(z));
    v.note(label + ": " + sci(e.mean * scale) + " +- " + sci(e.se * scale) + " vs " + sci(expected) + " (z " +
           sci(z) + ")");
    return z;
  };
  SimConfig base;
  base.replicas = 10000;
  base.dt = 1e-3;
  base.seed = 2026;

  {  // (a) Yule
    auto c = base;
    c.media = testing::constant_media(1.0, 0.0, 1.0);
    c.x0 = v1(0.0);
    c.sample_times = {2.0};
    const auto s = run_replicas(c);
    z_check("Yule E N(2)", s.total[0][0], 1.0, std::exp(2.0));
    const double e4 = std::exp(-4.0);
    const double exact = testing::yule_raw_moment(2, 2.0) * e4;
    const double z_limit = (s.total[0][1].mean * e4 - 2.0) / (s.total[0][1].se * e4);
    z_check("Yule E N(2)^2/e^4", s.total[0][1], e4, exact);
    v.note("Yule E N(2)^2/e^4 against the t -> infinity limit 2: z " + sci(z_limit));
  }
  {  // (b) critical branching
    auto c = base;
    c.media = testing::constant_media(1.0, 0.0, 0.5, 0.5);
    c.x0 = v1(0.0);
    c.sample_times = {1.0, 3.0};
    const auto s = run_replicas(c);
    z_check("r=0 E N(1)", s.total[0][0], 1.0, 1.0);
    z_check("r=0 E N(3)", s.total[1][0], 1.0, 1.0);
  }
  {  // (c), (d) cosine media
    auto media = testing::cosine_media();
    auto c = base;
    c.media = media;
    c.x0 = v1(0.0);
    c.sample_times = {6.0, 10.0};
    c.targets = {v1(0.0), v1(2.0)};
    const auto s = run_replicas(c);
    const auto fk = total_moment_fk(media, 1);
    const double mu = fk.mu;
    // x0 = 0 is node 0
    z_check("cosine E N(6)/e^{6 mu}", s.total[0][0], std::exp(-6.0 * mu), fk[1][0]);
    const std::vector<double> t10{10.0};
    for (std::size_t j = 0; j < c.targets.size(); ++j) {
      const auto m1 = solve_mk(media, MomentTarget::cube(c.targets[j]), 1, t10);
      z_check("cosine E n^{" + sci(c.targets[j][0]) + "}(10)", s.cube[j][1][0], 1.0, m1.at(0, c.x0));
    }
    v.require(s.censored == 0, std::to_string(s.censored) + " censored replicas");
  }
}

// 9. Convergence trends on cosine media.
void trends(Verdict& v) {
  auto media = testing::cosine_media();
  const std::vector<double> tq{5.0, 10.0};
  const auto q = first_moment_transient(media, tq);
  const double q5 = q[0].cwiseAbs().maxCoeff(), q10 = q[1].cwiseAbs().maxCoeff();
  v.require(q10 < q5, "q_1 sup norm " + sci(q10) + " at t=10 vs " + sci(q5) + " at t=5");
  v.note("|q_1|: " + sci(q5) + " (t=5), " + sci(q10) + " (t=10)");

  const RateProfile profile(media);
  const std::vector<double> times{10.0, 20.0, 40.0};
  const auto rows = check_local_limit(profile, 1, [](double t) { return v1(std::sqrt(t)); }, v1(0.0), times);
  std::string trace;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    trace += " t=" + sci(rows[i].t) + ":" + sci(rows[i].ratio) + "(target " + sci(rows[i].target) + ")";
    if (i > 0) v.require(rows[i].deviation < rows[i - 1].deviation, "local-limit deviation grew at t=" + sci(rows[i].t));
  }
  v.note("local-limit ratio along sqrt(t):" + trace);
}

// 10. Byte-identical validate reports across thread counts.
void determinism(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / ("perbranch_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path media = dir / "cosine.json";
  std::ofstream(media) << R"({"dimension":1,"a":1,"b":0,"alpha":{"const":0.5,"terms":[{"k":1,"cos":0.3}]},"beta":0})";
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  for (const std::string suite : {"simulation", "duality"}) {
    std::vector<std::string> reports;
    for (const char* threads : {"1", "8", "1", "8"}) {
      const fs::path out = dir / (suite + "_" + std::to_string(reports.size()));
      const std::string cmd = std::string("PERBRANCH_THREADS=") + threads + " '" + PERBRANCH_CLI +
                              "' validate --media '" + media.string() + "' --suite " + suite +
                              " --seed 42 --out '" + out.string() + "' > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      v.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, suite + " run exited with " + std::to_string(status));
      reports.push_back(slurp(out / ("validate_" + suite + ".json")));
    }
    bool same = !reports.front().empty();
    for (const auto& r : reports) same = same && r == reports.front();
    v.require(same, suite + " reports differ");
    v.note(suite + ": " + std::to_string(reports.size()) + " runs (1, 8, 1, 8 threads), " +
           std::to_string(reports.front().size()) + " bytes" + (same ? ", identical" : ", differing"));
  }
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "constant-media closed forms", 10.0, constant_media_closed_forms},
      {2, "drift and diffusivity are derivatives of mu", 60.0, derivative_identities},
      {3, "Legendre and Hessian duality", 0.0, duality},
      {4, "kernel asymptotics on cosine media", 300.0, kernel_asymptotics},
      {5, "moment hierarchy, Yule oracle", 120.0, yule_moments},
      {6, "gamma recursion, homogeneous oracle", 180.0, gamma_homogeneous},
      {7, "region properties on cosine media", 0.0, gamma_cosine},
      {8, "Monte Carlo against theory", 600.0, monte_carlo},
      {9, "transient decay and local limit trend", 0.0, trends},
      {10, "thread-count determinism of validate", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0) v.require(seconds < c.time_limit, "runtime " + sci(seconds) + " s over " + sci(c.time_limit));
    if (!v.pass()) ++failed;
    std::printf("%s [%d] %s (%.1f s)\n", v.pass() ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds);
    for (const auto& n : v.notes()) std::printf("      %s\n", n.c_str());
    for (const auto& f : v.failures()) std::printf("      failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
