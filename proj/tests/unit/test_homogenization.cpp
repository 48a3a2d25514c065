// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include "perbranch/homogenization.hpp"
#include "perbranch/torus_spectral.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace perbranch;

namespace {

SpectralTriple triple_at(const MediaPtr& media, int n, const Vec& tilt) {
  return principal_eigen(assemble_tilted(media, TorusGrid(media->dim(), n), tilt));
}

SpectralTriple triple_at(const MediaPtr& media, int n, double tilt) {
  return triple_at(media, n, Vec::Constant(media->dim(), tilt));
}

}  // namespace

TEST_CASE("K at zero tilt on constant media is diffusion plus advection") {
  auto media = testing::constant_media(1.0, 0.7, 0.4);
  const TorusGrid g(1, 32);
  const auto k = build_K(media, triple_at(media, 32, 0.0));
  StencilCoefficients sc;
  sc.dim = 1;
  sc.diffusion[0][0] = GridFunction::Ones(32);
  sc.drift[0] = GridFunction::Constant(32, 0.7);
  sc.potential = GridFunction::Zero(32);
  const Mat expect = Mat(assemble_operator(g, sc));
  CHECK((k.dense() - expect).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tilt 0.4 on constant a = 1 media shifts the drift by 0.4") {
  auto media = testing::constant_media(1.0, 0.3, 0.2);
  const auto v = transformed_drift(*media, triple_at(media, 64, 0.4));
  CHECK((v[0].array() - 0.7).abs().maxCoeff() < 1e-9);
}

TEST_CASE("K annihilates constants") {
  for (const auto& media : {testing::cosine_media(), testing::rough_media_2d()}) {
    const int n = media->dim() == 1 ? 128 : 24;
    for (double z : {-1.0, 0.0, 0.6}) {
      const auto k = build_K(media, triple_at(media, n, z));
      CHECK(k.apply(GridFunction::Ones(k.grid().size())).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("effective drift of constant media") {
  auto media = testing::constant_media(1.0, 0.7, 0.9);
  CHECK(effective_drift(*media, triple_at(media, 64, 0.0))[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(effective_drift(*media, triple_at(media, 64, 0.4))[0] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("effective diffusivity of constant media") {
  auto media = testing::constant_media(1.0, 0.2, 0.5);
  for (double z : {-1.0, 0.0, 2.0}) {
    const auto h = homogenize(media, triple_at(media, 64, z));
    CHECK(h.effective_diffusivity(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  }
  auto m2 = testing::constant_media_2d(1.0, 0.5);
  Vec z(2);
  z << 0.3, -0.2;
  const auto h2 = homogenize(m2, triple_at(m2, 16, z));
  CHECK((h2.effective_diffusivity - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gradient and Hessian of mu against finite differences") {
  auto media = testing::cosine_media();
  const int n = 256;
  auto mu = [&](double z) { return triple_at(media, n, z).eigenvalue; };
  for (double z : {-2.0, -0.7, 0.0, 0.3, 1.1, 2.5}) {
    const auto t = triple_at(media, n, z);
    const auto cell = solve_cell_problem(media, t);
    const Mat xi = effective_diffusivity(cell);
    CHECK(std::abs(cell.effective_drift[0] - testing::fd_first(mu, z, 1e-4)) < 1e-5);
    const double fd2 = testing::fd_second(mu, z, 1e-3);
    CHECK(std::abs(xi(0, 0) - fd2) < 1e-4);
    CHECK(fd2 > 0.0);
    CHECK(cell.solvability_residual.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("cell solution invariants") {
  auto media = testing::cosine_media();
  const auto t = triple_at(media, 128, 0.8);
  const auto cell = solve_cell_problem(media, t);
  const auto& g = cell.grid;
  CHECK(std::abs(grid_integral(g, cell.invariant_density) - 1.0) < 1e-10);
  CHECK(std::abs(grid_inner(g, cell.corrector[0], cell.invariant_density)) < 1e-12);
  // The bordered system solves K eta = ell - V - lambda exactly; lambda is the
  // O(h^2) gap between psi* and the discrete left null vector of K.
  const auto k = build_K(media, t);
  const GridFunction lhs = k.apply(cell.corrector[0]);
  const GridFunction rhs = (cell.effective_drift[0] - cell.gauge_multiplier[0]) - cell.drift[0].array();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(cell.cell_residual < 1e-6);
}

TEST_CASE("cell residual is a second-order discretization error") {
  auto media = testing::cosine_media();
  const double coarse = solve_cell_problem(media, triple_at(media, 128, 0.8)).cell_residual;
  const double fine = solve_cell_problem(media, triple_at(media, 256, 0.8)).cell_residual;
  CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("2D media: Xi is symmetric positive definite and equals the Hessian of mu") {
  auto media = testing::rough_media_2d();
  const int n = 32;
  Vec z(2);
  z << 0.4, -0.3;
  auto mu = [&](const Vec& tilt) { return triple_at(media, n, tilt).eigenvalue; };
  const auto h = homogenize(media, triple_at(media, n, z));
  const Mat& xi = h.effective_diffusivity;
  CHECK(std::abs(xi(0, 1) - xi(1, 0)) < 1e-14);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat>(xi).eigenvalues().minCoeff() > 0.0);
  const Mat fd = testing::fd_hessian(mu, z, 1e-3);
  CHECK((xi - fd).cwiseAbs().maxCoeff() < 1e-4);
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(2);
    e[i] = 1e-4;
    CHECK(std::abs(h.effective_drift[i] - (mu(z + e) - mu(z - e)) / 2e-4) < 1e-5);
  }
}

TEST_CASE("non-positive eigenfunction is rejected") {
  auto media = testing::cosine_media();
  auto t = triple_at(media, 32, 0.0);
  t.right[3] = 0.0;
  CHECK_THROWS_AS(build_K(media, t), DomainError);
}
