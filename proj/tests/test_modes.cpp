#include "doctest.h"

#include <cmath>

#include "pbec/errors.hpp"
#include "pbec/modes.hpp"

using namespace pbec;

TEST_CASE("uniform grid is a trapezoid rule over the extent") {
  const SpatialGrid g = SpatialGrid::uniform(401, 8.0);
  CHECK(g.size() == 401);
  CHECK(g.positions.front() == doctest::Approx(-8.0));
  CHECK(g.positions.back() == doctest::Approx(8.0));
  double sum = 0.0;
  for (double w : g.weights) sum += w;
  CHECK(sum == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(g.weights.front() == doctest::Approx(0.5 * g.weights[1]));
}

TEST_CASE("grid validation") {
  SpatialGrid g;
  CHECK_THROWS_AS(g.validate(), Error);
  g.positions = {0.0, 0.0};
  g.weights = {1.0, 1.0};
  CHECK_THROWS_AS(g.validate(), Error);
  g.positions = {0.0, 1.0};
  g.weights = {1.0, -1.0};
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("harmonic basis: ladder, detunings and orthonormality") {
  const ModeBasis b = build_harmonic_basis(20, 520.0, 1.7, 620.0, SpatialGrid::uniform(501, 10.0));
  REQUIRE(b.modes() == 20);
  for (int p = 0; p < b.modes(); ++p) {
    CHECK(b.frequency(p) == doctest::Approx(520.0 + 1.7 * p));
    CHECK(b.detuning(p) == doctest::Approx(620.0 - b.frequency(p)));
    if (p > 0) {
      CHECK(b.frequency(p) > b.frequency(p - 1));
      CHECK(b.detuning(p) < b.detuning(p - 1));
    }
  }
  const Eigen::MatrixXd gram = b.gram();
  CHECK((gram - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ground mode is the normalised gaussian") {
  const ModeBasis b = build_harmonic_basis(3, 520.0, 1.7, 620.0, SpatialGrid::uniform(401, 8.0));
  const double x = b.grid.positions[250];
  CHECK(std::abs(b.mode_function(0, 250)) ==
        doctest::Approx(std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x)).epsilon(1e-12));
  // parity
  CHECK(b.mode_function(1, 100) == doctest::Approx(-b.mode_function(1, 300)));
  CHECK(b.mode_function(2, 100) == doctest::Approx(b.mode_function(2, 300)));
}

TEST_CASE("too narrow a grid is refused") {
  CHECK_THROWS_AS(build_harmonic_basis(20, 520.0, 1.7, 620.0, SpatialGrid::uniform(41, 2.0)), Error);
}

TEST_CASE("overlap tensor symmetry and site sum") {
  const ModeBasis b = build_harmonic_basis(6, 520.0, 1.7, 620.0, SpatialGrid::uniform(201, 8.0));
  const OverlapTensor t = overlap_tensor(b);
  CHECK(t.modes() == 6);
  CHECK(t.sites() == 201);
  for (int i = 0; i < t.sites(); i += 17) {
    for (int p = 0; p < 6; ++p) {
      for (int q = 0; q < 6; ++q) {
        CHECK(t(p, q, i) == t(q, p, i));
        CHECK(t(p, q, i) == doctest::Approx(b.mode_function(p, i) * b.mode_function(q, i)));
      }
    }
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(b.grid.weights.data(), 201);
  CHECK((t.weighted_sum(w) - b.gram()).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((t.weighted_sum(w) - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("explicit site matrices") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.5, 0.5, 2.0;
  const OverlapTensor t = overlap_from_sites({a, 2.0 * a});
  CHECK(t.sites() == 2);
  CHECK(t(0, 1, 1) == 1.0);
  CHECK((t.site(0) - a).norm() == 0.0);
  Eigen::MatrixXd bad = a;
  bad(0, 1) = 0.4;
  CHECK_THROWS_AS(overlap_from_sites({bad}), Error);
}
