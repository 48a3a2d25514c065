// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <Eigen/SparseLU>
#include <doctest.h>

#include "perbranch/moments.hpp"
#include "perbranch/rate_function.hpp"
#include "perbranch/torus_spectral.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace perbranch;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

double sup_rel(const GridFunction& a, double b) { return (a.array() / b - 1.0).abs().maxCoeff(); }

}  // namespace

TEST_CASE("cube target starts from the indicator, higher orders from zero") {
  auto media = testing::cosine_media();
  MomentOptions mo;
  mo.nodes_per_unit = 16;
  mo.window_periods = 6;
  const double t[] = {0.0};
  const auto fields = solve_moment_hierarchy(media, MomentTarget::cube(v1(0)), 2, t, mo);
  const auto& g = fields[0].grid;
  for (Index i = 0; i < g.size(); ++i) {
    const double x = g.coords(i)[0];
    CHECK(fields[0].values[0][i] == ((x >= 0.0 && x < 1.0) ? 1.0 : 0.0));
    CHECK(fields[1].values[0][i] == 0.0);
  }
}

TEST_CASE("total population, constant potential") {
  auto media = testing::constant_media(1, 0, 0.5);
  const double t[] = {1.0, 4.0};
  const auto f = solve_mk(media, MomentTarget::total(), 1, t);
  for (std::size_t s = 0; s < 2; ++s) CHECK(sup_rel(f.values[s], std::exp(0.5 * t[s])) < 1e-7);
}

TEST_CASE("Yule hierarchy against the geometric law") {
  auto media = testing::constant_media(1, 0, 1.0);
  const double t[] = {2.0, 8.0};
  MomentOptions mo;
  mo.nodes_per_unit = 16;
  const auto trap = solve_moment_hierarchy(media, MomentTarget::total(), 5, t, mo);
  mo.coupling = SourceCoupling::Lagged;
  const auto lagged = solve_moment_hierarchy(media, MomentTarget::total(), 5, t, mo);
  for (int k = 1; k <= 5; ++k)
    for (std::size_t s = 0; s < 2; ++s) {
      const double exact = testing::yule_factorial_moment(k, t[s]);
      CHECK(sup_rel(trap[k - 1].values[s], exact) < 1e-5);
      CHECK(sup_rel(lagged[k - 1].values[s], exact) < 1e-2);
    }
  CHECK(std::abs(trap[1].values[1][0] * std::exp(-16.0) - 2.0) < 1e-3);
}

TEST_CASE("f_k of the Yule process are factorials") {
  const auto table = total_moment_fk(testing::constant_media(1, 0, 1.0), 5);
  double factorial = 1.0;
  for (int k = 1; k <= 5; ++k) {
    factorial *= k;
    CHECK((table[k].array() - factorial).abs().maxCoeff() < 1e-6);
    if (k > 1) CHECK(table.tail[static_cast<std::size_t>(k - 1)] < 1e-8);
  }
  CHECK(table.growth_constant <= 1.0 + 1e-6);
}

TEST_CASE("f_1 is the principal eigenfunction and f_k solve their resolvent equations") {
  auto media = testing::cosine_media();
  const auto table = total_moment_fk(media, 4);
  const auto op = assemble_tilted(media, table.grid, Vec::Zero(1));
  const auto triple = principal_eigen(op);
  CHECK((table[1] - triple.right).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(table.mu - triple.eigenvalue) < 1e-12);
  for (int k = 2; k <= 4; ++k) {
    SparseMatrix shifted = -op.matrix();
    for (Index i = 0; i < shifted.rows(); ++i) shifted.coeffRef(i, i) += k * table.mu;
    Eigen::SparseLU<SparseMatrix> lu(shifted);
    const GridFunction direct = lu.solve(fk_source(*media, table, k));
    CHECK((table[k] - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(table[k].minCoeff() > 0.0);
  }
  double factorial = 1.0;
  for (int k = 1; k <= 4; ++k) {
    factorial *= k;
    CHECK(table[k].maxCoeff() <= std::pow(table.growth_constant, k) * factorial * (1 + 1e-12));
  }
}

TEST_CASE("subcritical media have no f_k") {
  CHECK_THROWS_AS(total_moment_fk(testing::constant_media(1, 0, 0.2, 0.5), 2), DomainError);
}

TEST_CASE("Stirling numbers") {
  CHECK(stirling2(1, 1) == 1);
  CHECK(stirling2(3, 2) == 3);
  CHECK(stirling2(4, 2) == 7);
  CHECK(stirling2(10, 4) == 34105);
  CHECK_THROWS_AS(stirling2(3, 4), DomainError);
  CHECK_THROWS_AS(stirling2(0, 0), DomainError);
}

TEST_CASE("raw moments from the Stirling sums") {
  auto media = testing::cosine_media();
  MomentOptions mo;
  mo.nodes_per_unit = 32;
  const double t[] = {0.5, 1.0};
  const auto f = solve_moment_hierarchy(media, MomentTarget::total(), 3, t, mo);
  const auto r1 = assemble_raw_moment(std::span(f).first(1), 1);
  const auto r2 = assemble_raw_moment(std::span(f).first(2), 2);
  const auto r3 = assemble_raw_moment(f, 3);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK((r1[s] - f[0].values[s]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r2[s] - f[0].values[s] - f[1].values[s]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r3[s] - f[0].values[s] - 3 * f[1].values[s] - f[2].values[s]).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(assemble_raw_moment(std::span(f).first(2), 3), DomainError);
}

TEST_CASE("Yule raw moments through the Stirling assembly") {
  auto media = testing::constant_media(1, 0, 1.0);
  MomentOptions mo;
  mo.nodes_per_unit = 8;
  const double t[] = {2.0};
  const auto f = solve_moment_hierarchy(media, MomentTarget::total(), 3, t, mo);
  for (int k = 1; k <= 3; ++k)
    CHECK(sup_rel(assemble_raw_moment(std::span(f).first(static_cast<std::size_t>(k)), k)[0],
                  testing::yule_raw_moment(k, 2.0)) < 1e-5);
}

TEST_CASE("Duhamel formula for the second total moment") {
  auto media = testing::cosine_media();
  const int n = 16;
  const double horizon = 2.0;
  MomentOptions mo;
  mo.nodes_per_unit = n;
  const double t[] = {horizon};
  const auto f = solve_moment_hierarchy(media, MomentTarget::total(), 2, t, mo);

  const TorusGrid g(1, n);
  const Mat a = assemble_tilted(media, g, Vec::Zero(1)).dense();
  const GridFunction alpha = sample_field(media->branching(), g);
  std::vector<double> nodes, weights;
  testing::gauss_legendre(40, 0.0, horizon, nodes, weights);
  GridFunction m2 = GridFunction::Zero(n);
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const GridFunction m1 = testing::dense_expm(a, nodes[q]) * GridFunction::Ones(n);
    const GridFunction source = 2.0 * alpha.cwiseProduct(m1.cwiseProduct(m1));
    m2 += weights[q] * (testing::dense_expm(a, horizon - nodes[q]) * source);
  }
  CHECK((f[1].values[0] - m2).cwiseAbs().maxCoeff() / m2.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("cube hierarchy is nonnegative and log-convex in k") {
  auto media = testing::cosine_media();
  MomentOptions mo;
  mo.nodes_per_unit = 32;
  const double t[] = {0.5, 2.0, 4.0};
  const auto f = solve_moment_hierarchy(media, MomentTarget::cube(v1(1)), 4, t, mo);
  for (const auto& field : f) CHECK(field.min_value >= -1e-12);
  std::vector<std::vector<GridFunction>> raw;
  for (int k = 1; k <= 4; ++k) raw.push_back(assemble_raw_moment(std::span(f).first(static_cast<std::size_t>(k)), k));
  int violations = 0;
  for (std::size_t s = 0; s < 3; ++s)
    for (int k = 3; k <= 4; ++k)
      for (int i = 2; i <= k - 1; ++i) {
        const GridFunction lhs = raw[k - 2][s].cwiseProduct(raw[0][s]);
        const GridFunction rhs = raw[k - i - 1][s].cwiseProduct(raw[i - 1][s]);
        violations += static_cast<int>(((rhs - lhs).array() > 1e-12 * (1.0 + rhs.array().abs())).count());
      }
  CHECK(violations == 0);
}

TEST_CASE("first-moment transient decays") {
  auto media = testing::cosine_media();
  const double t[] = {5.0, 10.0};
  const auto q = first_moment_transient(media, t);
  const double q5 = q[0].cwiseAbs().maxCoeff(), q10 = q[1].cwiseAbs().maxCoeff();
  CHECK(q10 < 0.5 * q5);
  CHECK(q5 < 1e-6);
}

TEST_CASE("local limit, k = 1, constant media along y = 0") {
  const RateProfile profile(testing::constant_media(1, 0, 0.5));
  const double t[] = {5.0, 10.0, 20.0};
  const auto rows = check_local_limit(profile, 1, [](double) { return v1(0); }, v1(0), t);
  double previous = INFINITY;
  for (const auto& r : rows) {
    const double exact = testing::gaussian_interval_mass(1, 0, 0.5, r.t, 0, 0, 1) / r.normalizer;
    CHECK(std::abs(r.ratio - exact) < 1e-4);
    CHECK(r.target == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.deviation < previous);
    previous = r.deviation;
  }
  CHECK(rows.back().deviation < 0.01);
}

TEST_CASE("local limit, k = 2, Yule media at t = 8") {
  const RateProfile profile(testing::constant_media(1, 0, 1.0));
  const double t[] = {8.0};
  LocalLimitOptions lo;
  lo.nodes_per_unit = 16;
  const auto rows = check_local_limit(profile, 2, [](double) { return v1(0); }, v1(0), t, lo);
  CHECK(std::abs(rows.front().ratio - 2.0) < 0.1);
}
