// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <CLI11.hpp>

#include "perbranch/commands.hpp"
#include "perbranch/parallel.hpp"
#include "perbranch/validate.hpp"

namespace {

constexpr int kCheckFailure = 1;
constexpr int kUsageError = 2;

void add_common(CLI::App* app, perbranch::cli::Common& c) {
  app->add_option("--media", c.media_path, "Media JSON (a media document, or any document with a 'media' member)")
      ->required();
  app->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  app->add_option("--grid", c.grid, "Grid nodes per unit length (0 = module default)")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads (default from PERBRANCH_THREADS)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace perbranch::cli;
  CLI::App app{"perbranch: spectral, moment and Monte Carlo computations for branching diffusions in periodic media"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "perbranch 0.1.0");

  Common common;
  common.argv.assign(argv + 1, argv + argc);

  EigArgs eig;
  auto* c_eig = app.add_subcommand("eig", "Principal eigenvalue mu(zeta) over a tilt grid");
  add_common(c_eig, common);
  c_eig->add_option("--zeta", eig.tilts, "Tilts, 'z' or 'z1,z2' items");
  c_eig->add_option("--range", eig.range, "Tilt grid lo:hi:count (per axis), default -2:2:17");
  c_eig->add_flag("--dump", eig.dump, "Also write eigenfunctions.csv");

  RateArgs rate;
  auto* c_rate = app.add_subcommand("rate", "Rate function Phi(c) and the dual tilt over a velocity grid");
  add_common(c_rate, common);
  c_rate->add_option("--c", rate.velocities, "Velocities");
  c_rate->add_option("--range", rate.range, "Velocity grid lo:hi:count, default -2:2:17");

  KernelArgs kernel;
  auto* c_kernel = app.add_subcommand("kernel", "Time-stepped first-moment kernel against its large-time asymptote");
  add_common(c_kernel, common);
  c_kernel->add_option("--t", kernel.times, "Times")->capture_default_str();
  c_kernel->add_option("--y", kernel.ys, "Target points (grid nodes)")->capture_default_str();
  c_kernel->add_option("--x", kernel.x, "Start point (default origin)");
  c_kernel->add_option("--dt", kernel.dt, "Time step")->capture_default_str()->check(CLI::PositiveNumber);

  HomogArgs homog;
  auto* c_homog = app.add_subcommand("homog", "Effective drift and diffusivity from the cell problem");
  add_common(c_homog, common);
  c_homog->add_option("--zeta", homog.tilts, "Tilts")->capture_default_str();
  c_homog->add_option("--range", homog.range, "Tilt grid lo:hi:count");

  MomentsArgs moments;
  auto* c_mom = app.add_subcommand("moments", "Moment hierarchy time series and the f_k limits");
  add_common(c_mom, common);
  c_mom->add_option("--K", moments.max_order, "Highest order")->capture_default_str();
  c_mom->add_option("--T", moments.horizon, "Horizon")->capture_default_str();
  c_mom->add_option("--samples", moments.samples, "Sample intervals on [0, T]")->capture_default_str();
  c_mom->add_option("--dt", moments.dt, "Time step")->capture_default_str()->check(CLI::PositiveNumber);
  c_mom->add_option("--cube", moments.corner, "Corner y of the counting cube y + [0,1)^d (default: total population)");
  c_mom->add_option("--coupling", moments.coupling, "trapezoidal or lagged")->capture_default_str();

  GammaArgs gamma;
  auto* c_gamma = app.add_subcommand("gamma", "gamma_k tables and the regions G_k");
  add_common(c_gamma, common);
  c_gamma->add_option("--K", gamma.max_order, "Highest order")->capture_default_str();
  c_gamma->add_option("--vmin", gamma.lo, "Velocity box lower bound")->capture_default_str();
  c_gamma->add_option("--vmax", gamma.hi, "Velocity box upper bound")->capture_default_str();
  c_gamma->add_option("--points", gamma.points, "Velocity nodes per axis")->capture_default_str();

  SimArgs sim;
  auto* c_sim = app.add_subcommand("sim", "Monte Carlo replicas of the branching diffusion");
  add_common(c_sim, common);
  c_sim->add_option("--replicas", sim.replicas, "Replica count");
  c_sim->add_option("--T", sim.horizon, "Horizon (overrides the sim block times)");
  c_sim->add_option("--dt", sim.dt, "Time step");
  c_sim->add_option("--target", sim.targets, "Cube corners y");
  c_sim->add_option("--x0", sim.x0, "Start point");
  c_sim->add_option("--cap", sim.cap, "Population cap per replica");
  c_sim->add_flag("--cap-override", sim.cap_override, "Accept a cap below 10 e^{max r T}");

  std::string suite;
  auto* c_val = app.add_subcommand("validate", "Run a validation suite and write a JSON verdict");
  add_common(c_val, common);
  c_val->add_option("--suite", suite, "duality | kernel | moments | gamma | simulation")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  if (common.threads == 0) common.threads = perbranch::default_thread_count();

  try {
    if (c_eig->parsed()) return cmd_eig(common, eig);
    if (c_rate->parsed()) return cmd_rate(common, rate);
    if (c_kernel->parsed()) return cmd_kernel(common, kernel);
    if (c_homog->parsed()) return cmd_homog(common, homog);
    if (c_mom->parsed()) return cmd_moments(common, moments);
    if (c_gamma->parsed()) return cmd_gamma(common, gamma);
    if (c_sim->parsed()) return cmd_sim(common, sim);
    if (c_val->parsed()) return cmd_validate(common, suite);
  } catch (const perbranch::ConfigError& e) {
    std::cerr << "perbranch: configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const perbranch::DomainError& e) {
    std::cerr << "perbranch: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "perbranch: " << e.what() << '\n';
    return kCheckFailure;
  }
  return kUsageError;
}
