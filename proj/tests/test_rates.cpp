#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "pbec/errors.hpp"
#include "pbec/rates.hpp"
#include "pbec/units.hpp"

using namespace pbec;

TEST_CASE("room temperature beta from the physical constants") {
  // hbar / (k_B 300 K) = 2.5465e-14 s
  CHECK(units::beta_from_temperature(300.0) == doctest::Approx(0.0254649).epsilon(1e-5));
}

TEST_CASE("Kennard-Stepanov examples") {
  Eigen::VectorXd e(3), d(3);
  e << 1.0, 2.0, 0.5;
  d << 0.0, 10.0, -4.0;
  const Eigen::VectorXd a = kennard_stepanov_absorption(e, d, 0.25465);
  CHECK(a(0) == 1.0);
  CHECK(a(1) == doctest::Approx(2.0 * std::exp(-2.5465)).epsilon(1e-15));
  CHECK(a(2) == doctest::Approx(0.5 * std::exp(0.25465 * 4.0)).epsilon(1e-15));
  const Eigen::VectorXd doubled = kennard_stepanov_absorption(2.0 * e, d, 0.25465);
  CHECK((doubled - 2.0 * a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Kennard-Stepanov holds exactly for random rate sets") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + trial % 12;
    const ModeBasis b = build_harmonic_basis(m, 480.0 + 80.0 * u(rng), 0.5 + 3.0 * u(rng),
                                             620.0, SpatialGrid::uniform(201, 9.0));
    const GaussianProfile g{u(rng), 450.0 + 100.0 * u(rng), 5.0 + 40.0 * u(rng)};
    const double beta = 0.05 * u(rng);
    const RateSet r = make_rate_set(g, b, beta);
    for (int p = 0; p < m; ++p) {
      CHECK(r.absorption(p) == r.emission(p) * std::exp(-beta * b.detuning(p)));
    }
  }
}

TEST_CASE("invalid rate inputs") {
  Eigen::VectorXd e(1), d(1);
  e << -1.0;
  d << 0.0;
  CHECK_THROWS_AS(kennard_stepanov_absorption(e, d, 0.1), Error);
  e << 1.0;
  CHECK_THROWS_AS(kennard_stepanov_absorption(e, d, -0.1), Error);
}

TEST_CASE("parametric profiles") {
  CHECK(evaluate_profile(FlatProfile{0.7}, 123.0) == 0.7);
  const GaussianProfile g{1.0, 590.0, 40.0};
  CHECK(evaluate_profile(g, 590.0) == 1.0);
  CHECK(evaluate_profile(g, 630.0) == doctest::Approx(std::exp(-0.5)));
  // continuity at a 1e-6 step
  for (double w = 500.0; w < 640.0; w += 7.3) {
    CHECK(std::abs(evaluate_profile(g, w + 1e-6) - evaluate_profile(g, w)) < 1e-7);
  }
}

TEST_CASE("tabulated profile: interpolation, clamping, format errors") {
  std::istringstream in("# frequency rate\n500 0.5\n\n540 1.5\n");
  const TabulatedProfile t = TabulatedProfile::parse(in);
  bool clamped = true;
  CHECK(t(520.0, &clamped) == doctest::Approx(1.0));
  CHECK_FALSE(clamped);
  CHECK(t(600.0, &clamped) == 1.5);
  CHECK(clamped);

  std::istringstream bad("540 1\n500 2\n");
  CHECK_THROWS_AS(TabulatedProfile::parse(bad), Error);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(TabulatedProfile::parse(empty), Error);
  std::istringstream junk("500 abc\n");
  CHECK_THROWS_AS(TabulatedProfile::parse(junk), Error);
}

TEST_CASE("extrapolated modes produce one warning each") {
  std::istringstream in("500 0.5\n525 1.5\n");
  const TabulatedProfile t = TabulatedProfile::parse(in);
  const ModeBasis b = build_harmonic_basis(6, 520.0, 2.0, 620.0, SpatialGrid::uniform(201, 8.0));
  std::vector<std::string> warnings;
  const Eigen::VectorXd e = emission_profile(t, b, &warnings);
  CHECK(warnings.size() == 3);  // 526, 528, 530
  CHECK(e(5) == 1.5);
}
