// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "perbranch/branching_sim.hpp"
#include "perbranch/intermittency.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/torus_spectral.hpp"

using namespace perbranch;

namespace {

MediaPtr cosine() {
  static const MediaPtr m = parse_media_spec(
      R"({"dimension":1,"a":1,"b":0,"alpha":{"const":0.5,"terms":[{"k":1,"cos":0.3}]},"beta":0})");
  return m;
}

MediaPtr rough_2d() {
  static const MediaPtr m = parse_media_spec(R"({"dimension":2,
    "a":[[{"const":1,"terms":[{"k":[1,0],"cos":0.2}]},0.2],[0.2,{"const":0.8,"terms":[{"k":[0,1],"sin":0.1}]}]],
    "b":[0.1,0],"alpha":{"const":0.6,"terms":[{"k":[1,1],"cos":0.2}]},"beta":0.1})");
  return m;
}

}  // namespace

static void BM_PrincipalEigen1D(benchmark::State& state) {
  const TorusGrid grid(1, static_cast<int>(state.range(0)));
  const auto op = assemble_tilted(cosine(), grid, Vec::Constant(1, 0.7));
  for (auto _ : state) benchmark::DoNotOptimize(principal_eigen(op).eigenvalue);
}
BENCHMARK(BM_PrincipalEigen1D)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_PrincipalEigen2D(benchmark::State& state) {
  const TorusGrid grid(2, static_cast<int>(state.range(0)));
  Vec tilt(2);
  tilt << 0.5, -0.3;
  const auto op = assemble_tilted(rough_2d(), grid, tilt);
  for (auto _ : state) benchmark::DoNotOptimize(principal_eigen(op).eigenvalue);
}
BENCHMARK(BM_PrincipalEigen2D)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_LegendreTransform(benchmark::State& state) {
  const RateProfile profile(cosine());
  double c = 0.1;
  for (auto _ : state) {
    // fresh velocities so the eigen cache does not short-circuit the Newton solve
    c += 1e-3;
    benchmark::DoNotOptimize(legendre_transform(profile, Vec::Constant(1, c)).value);
  }
}
BENCHMARK(BM_LegendreTransform)->Unit(benchmark::kMillisecond);

static void BM_CrankNicolsonStep(benchmark::State& state) {
  const TorusGrid grid(1, static_cast<int>(state.range(0)));
  const auto op = assemble_tilted(cosine(), grid, Vec::Zero(1));
  const CrankNicolson cn(op.matrix(), 1e-3);
  GridFunction u = GridFunction::Ones(grid.size());
  for (auto _ : state) {
    cn.step(u);
    benchmark::DoNotOptimize(u.data());
  }
  state.SetItemsProcessed(state.iterations() * grid.size());
}
BENCHMARK(BM_CrankNicolsonStep)->Arg(256)->Arg(4096)->Arg(65536);

static void BM_GammaTable(benchmark::State& state) {
  auto profile = std::make_shared<const RateProfile>(cosine());
  for (auto _ : state) {
    const auto table = GammaTable::build(profile, VelocityGrid::box(1, -2.0, 2.0, 21), static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(table.node_value(1, 0));
  }
}
BENCHMARK(BM_GammaTable)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_EnsembleStep(benchmark::State& state) {
  const FieldTable fields(*cosine(), 2048);
  const auto particles = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    state.PauseTiming();
    Ensemble ens(1, 0, Vec::Zero(1));
    ens.positions.assign(particles, 0.25);
    state.ResumeTiming();
    for (int s = 0; s < 100; ++s) step_ensemble(ens, fields, 1e-4, 1L << 40);
    benchmark::DoNotOptimize(ens.positions.data());
  }
  state.SetItemsProcessed(state.iterations() * 100 * static_cast<long>(particles));
}
BENCHMARK(BM_EnsembleStep)->Arg(1000)->Arg(100000);

static void BM_RunReplicas(benchmark::State& state) {
  SimConfig c;
  c.media = cosine();
  c.x0 = Vec::Zero(1);
  c.sample_times = {2.0};
  c.dt = 1e-3;
  c.replicas = state.range(0);
  c.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_replicas(c).total[0][0].mean);
}
BENCHMARK(BM_RunReplicas)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
