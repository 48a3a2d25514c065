// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "perbranch/periodic_media.hpp"
#include "perbranch/trig_interpolant.hpp"
#include "support/fixtures.hpp"

using namespace perbranch;

TEST_CASE("constant document parses to constant fields") {
  auto m = parse_media_spec(R"({"dimension": 1, "a": 1, "b": 0, "alpha": 0.5, "beta": 0})");
  CHECK(m->dim() == 1);
  CHECK(m->is_constant());
  for (double x : {0.0, 0.3, 0.71}) {
    const double p[1] = {x};
    CHECK(m->potential_at(p) == 0.5);
  }
}

TEST_CASE("cosine branching rate with minimum 0.2 is accepted") {
  auto m = testing::cosine_media();
  const double half[1] = {0.5};
  CHECK(m->branching()(std::span<const double>(half)) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_FALSE(m->is_constant());
}

TEST_CASE("negative branching rate is rejected with the offending node") {
  try {
    parse_media_spec(R"({"dimension": 1, "a": 1, "b": 0,
      "alpha": {"const": 0.5, "terms": [{"k": 1, "cos": 0.7}]}, "beta": 0})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("alpha negative") != std::string::npos);
    CHECK(what.find("x=0.5") != std::string::npos);
    CHECK(what.find("-0.2") != std::string::npos);
  }
}

TEST_CASE("malformed and inadmissible documents") {
  CHECK_THROWS_AS(parse_media_spec("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 3, "a": 1, "alpha": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 1, "a": -1, "alpha": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 1, "a": 1, "alpha": 1, "beta": -0.1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 2, "a": [[1, 0.2], [0.3, 1]], "alpha": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 2, "a": [[1, 2], [2, 1]], "alpha": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 1, "b": 0, "alpha": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_media_spec(R"({"dimension": 1, "a": 1, "alpha": {"terms": [{"cos": 1}]}})"), ConfigError);
  CHECK_THROWS_AS(load_media_spec("/nonexistent/media.json"), ConfigError);
}

TEST_CASE("hash identifies the canonical form") {
  auto a = parse_media_spec(R"({"dimension": 1, "a": 1, "b": 0, "alpha": 0.5, "beta": 0})");
  auto b = parse_media_spec(R"({"beta": 0.0, "alpha": {"const": 0.5}, "a": [[1]], "dimension": 1})");
  auto c = parse_media_spec(R"({"dimension": 1, "a": 1, "b": 0, "alpha": 0.6, "beta": 0})");
  CHECK(a->hash() == b->hash());
  CHECK(a->hash() != c->hash());
  CHECK(a->hash().size() == 16);
  CHECK(media_from_json(a->canonical())->hash() == a->hash());
}

TEST_CASE("sample_field examples") {
  SUBCASE("constant") {
    const auto v = sample_field(TrigSeries::constant(1, 0.5), TorusGrid(1, 8));
    REQUIRE(v.size() == 8);
    for (Index i = 0; i < 8; ++i) CHECK(v[i] == 0.5);
  }
  SUBCASE("cosine at quarter points") {
    const TrigSeries c(1, 0.0, {TrigTerm{{1, 0}, 1.0, 0.0}});
    const auto v = sample_field(c, TorusGrid(1, 4));
    const double expect[4] = {1, 0, -1, 0};
    for (Index i = 0; i < 4; ++i) CHECK(std::abs(v[i] - expect[i]) < 1e-15);
  }
  SUBCASE("linearity") {
    const TrigSeries s(1, 0.0, {TrigTerm{{1, 0}, 0.0, 1.0}});
    const TrigSeries c(1, 0.0, {TrigTerm{{2, 0}, 1.0, 0.0}});
    const TrigSeries both(1, 0.0, {TrigTerm{{1, 0}, 0.0, 1.0}, TrigTerm{{2, 0}, 1.0, 0.0}});
    const TorusGrid g(1, 8);
    const Vec diff = sample_field(both, g) - sample_field(s, g) - sample_field(c, g);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(sample_field(TrigSeries::constant(2, 1.0), TorusGrid(1, 8)), DomainError);
  }
}

TEST_CASE("series are periodic to rounding") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const TrigSeries f(2, 0.3,
                     {TrigTerm{{1, 0}, 0.7, -0.2}, TrigTerm{{2, -1}, 0.1, 0.9}, TrigTerm{{0, 3}, -0.5, 0.4}});
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = u(rng), y = u(rng);
    CHECK(std::abs(f.at(x, y) - f.at(x + 1.0, y)) < 1e-14);
    CHECK(std::abs(f.at(x, y) - f.at(x, y - 1.0)) < 1e-14);
  }
}

TEST_CASE("trigonometric interpolation reproduces band-limited series") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SUBCASE("d = 1") {
    const TrigSeries f(1, 0.2, {TrigTerm{{1, 0}, 0.3, 0.1}, TrigTerm{{3, 0}, -0.2, 0.5}});
    const TorusGrid g(1, 8);
    const TrigInterpolant p(g, sample_field(f, g));
    for (int i = 0; i < 200; ++i) {
      Vec x(1);
      x << u(rng);
      CHECK(std::abs(p(x) - f(x)) < 1e-12);
    }
  }
  SUBCASE("d = 2") {
    const TrigSeries f(2, 0.2, {TrigTerm{{1, 2}, 0.3, 0.1}, TrigTerm{{-2, 1}, -0.2, 0.5}});
    const TorusGrid g(2, 6);
    const TrigInterpolant p(g, sample_field(f, g));
    for (int i = 0; i < 200; ++i) {
      Vec x(2);
      x << u(rng), u(rng);
      CHECK(std::abs(p(x) - f(x)) < 1e-12);
    }
  }
}

TEST_CASE("torus grid wraps periodically") {
  const TorusGrid g(2, 4, 3, -1);
  CHECK(g.size() == 144);
  CHECK(g.neighbor(g.node({0, 5}), 0, -1) == g.node({11, 5}));
  CHECK(g.neighbor(g.node({11, 11}), 1, 1) == g.node({11, 0}));
  const double p[2] = {-1.0, 0.25};
  const Index n = g.node_at(p);
  CHECK(g.coords(n)[0] == -1.0);
  CHECK(g.coords(n)[1] == 0.25);
  const double off[2] = {0.1, 0.0};
  CHECK_THROWS_AS(g.node_at(off), DomainError);
  const TorusGrid unit(1, 16);
  CHECK(grid_integral(unit, GridFunction::Constant(16, 2.0)) == doctest::Approx(2.0));
}

TEST_CASE("symmetric square root") {
  Mat a(2, 2);
  a << 2.0, 0.3, 0.3, 1.0;
  const Mat s = symmetric_sqrt(a);
  CHECK((s * s - a).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(s(0, 1) - s(1, 0)) < 1e-15);
}
