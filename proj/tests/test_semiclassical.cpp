#include "doctest.h"

#include <cmath>

#include "pbec/semiclassical.hpp"
#include "support.hpp"

using namespace pbec;
using test::scalar_model;

namespace {

SystemState scalar_state(double n, std::vector<double> f) {
  SystemState s = SystemState::cold(1, static_cast<int>(f.size()));
  s.photons(0, 0) = n;
  for (std::size_t i = 0; i < f.size(); ++i) s.excitation(Eigen::Index(i)) = f[i];
  return s;
}

}  // namespace

TEST_CASE("photon rate: scalar hand evaluation") {
  // -kappa n + [f E (n + 1) - (1 - f) A n] with the 1/2 prefactor on the
  // molecular bracket: -0.4 + 0.5 (1.5 - 1.0)
  const SystemModel m = scalar_model(1.0, 1.0, 0.2, {0.0}, 0.0);
  const Eigen::MatrixXcd dn = rhs_photon(scalar_state(2.0, {0.5}), m);
  CHECK(dn(0, 0).real() == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(dn(0, 0).imag() == 0.0);
}

TEST_CASE("molecule rate: scalar hand evaluation") {
  // E~ = E (n + 1) = 2, A~ = A n = 1: -(2)(0.5) + (1)(0.5)
  const SystemModel m = scalar_model(1.0, 1.0, 0.0, {0.0}, 0.0);
  const Eigen::VectorXd df = rhs_molecule(scalar_state(1.0, {0.5}), m);
  CHECK(df(0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("trivial rate limits") {
  const SystemModel m = scalar_model(0.3, 0.1, 0.2, {0.05, 0.02}, 0.01);
  CHECK(test::max_abs(rhs_photon(scalar_state(0.0, {0.0, 0.0}), m)) == 0.0);
  const Eigen::VectorXd df = rhs_molecule(scalar_state(0.0, {0.0, 0.0}), m);
  CHECK(df(0) == doctest::Approx(0.05));
  CHECK(df(1) == doctest::Approx(0.02));
  // fully excited: spontaneous emission seeds the photons and f cannot grow
  const SystemState full = scalar_state(0.0, {1.0, 1.0});
  CHECK(rhs_photon(full, m)(0, 0).real() == doctest::Approx(2.0 * 0.3));
  for (int i = 0; i < 2; ++i) CHECK(rhs_molecule(full, m)(i) <= 0.0);
}

TEST_CASE("derived fields: site-sum identity and homogeneity") {
  const ModelSpec spec = test::small_spec(5);
  BuiltModel built = build_model(spec);
  SystemState s = SystemState::cold(5, built.system.sites());
  for (int i = 0; i < s.sites(); ++i) s.excitation(i) = 0.5 + 0.4 * std::sin(0.1 * i);
  s.photons(0, 0) = 3.0;
  s.photons(1, 1) = 1.0;
  s.photons(0, 1) = std::complex<double>(0.2, 0.1);
  s.photons(1, 0) = std::conj(s.photons(0, 1));
  const DerivedFields d = derived_fields(s, built.system);
  const Eigen::MatrixXd total = built.system.overlap.weighted_sum(built.system.site_weight);
  // site weights carry the molecule density, so compare relative to the scale
  CHECK((d.f_plus + d.f_minus - total).cwiseAbs().maxCoeff() <= 1e-10 * total.cwiseAbs().maxCoeff());

  SystemModel doubled = built.system;
  doubled.site_weight *= 2.0;
  const DerivedFields d2 = derived_fields(s, doubled);
  CHECK((d2.f_plus - 2.0 * d.f_plus).cwiseAbs().maxCoeff() <= 1e-12 * d.f_plus.cwiseAbs().maxCoeff());
  CHECK((d2.f_minus - 2.0 * d.f_minus).cwiseAbs().maxCoeff() <=
        1e-12 * d.f_minus.cwiseAbs().maxCoeff());
}

TEST_CASE("photon rate is exactly Hermitian") {
  const BuiltModel built = build_model(test::small_spec(6));
  SystemState s = SystemState::cold(6, built.system.sites());
  s.excitation.setConstant(0.3);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(6, 6);
  s.photons = a * a.adjoint();
  const Eigen::MatrixXcd dn = rhs_photon(s, built.system);
  CHECK((dn - dn.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("packer round trip") {
  const StatePacker packer(3, 4);
  SystemState s = SystemState::cold(3, 4);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(3, 3);
  s.photons = a * a.adjoint();
  s.excitation << 0.1, 0.2, 0.3, 0.4;
  const SystemState back = packer.unpack(packer.pack(s));
  CHECK(test::max_abs(back.photons - s.photons) <= 1e-15);
  CHECK((back.excitation - s.excitation).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure cavity decay") {
  SystemModel m = scalar_model(0.0, 0.0, 0.2, {0.0}, 0.0);
  const std::vector<double> times{0.0, 1.0, 5.0, 20.0};
  const Trajectory traj = evolve(scalar_state(3.0, {0.0}), m, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(traj.states[k].photons(0, 0).real() ==
          doctest::Approx(3.0 * std::exp(-0.2 * times[k])).epsilon(1e-7));
  }
}

TEST_CASE("two-level relaxation without photons") {
  const double up = 0.03, down = 0.05;
  SystemModel m = scalar_model(0.0, 0.0, 0.2, {up}, down);
  const std::vector<double> times{0.0, 10.0, 40.0};
  const Trajectory traj = evolve(scalar_state(0.0, {0.0}), m, times);
  const double target = up / (up + down);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(traj.states[k].excitation(0) ==
          doctest::Approx(target * (1.0 - std::exp(-(up + down) * times[k]))).epsilon(1e-7));
  }
}

TEST_CASE("trajectory keeps hermiticity and positivity") {
  const BuiltModel built = build_model(test::small_spec(6));
  std::vector<double> times;
  for (int k = 0; k <= 40; ++k) times.push_back(50.0 * k);
  const Trajectory traj =
      evolve(SystemState::cold(6, built.system.sites()), built.system, times);
  for (const auto& s : traj.states) {
    CHECK(s.hermiticity_defect() <= 1e-10);
    CHECK(s.photons.diagonal().real().minCoeff() >= -1e-9);
    CHECK(s.excitation.minCoeff() >= -1e-12);
    CHECK(s.excitation.maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("evolve rejects tolerances out of range") {
  const SystemModel m = scalar_model(0.0, 0.0, 0.2, {0.0}, 0.0);
  EvolveOptions o;
  o.rtol = 1e-2;
  CHECK_THROWS_AS(evolve(scalar_state(1.0, {0.0}), m, {0.0, 1.0}, o), Error);
}

TEST_CASE("steady state: no pump means an empty cavity") {
  ModelSpec spec = test::small_spec();
  spec.pump_ratio = 0.0;
  const BuiltModel built = build_model(spec);
  const SteadyState ss = steady_state(built.system);
  CHECK(ss.converged);
  CHECK(test::max_abs(ss.state.photons) == 0.0);
  CHECK(ss.state.excitation.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("steady state: scalar closed form") {
  // single site: f and n from the quadratic balance, checked through the
  // residual and against evolve at long times
  const SystemModel m = scalar_model(0.4, 0.1, 0.2, {0.3}, 0.05);
  const SteadyState ss = steady_state(m);
  REQUIRE(ss.converged);
  CHECK(std::abs(rhs_photon(ss.state, m)(0, 0)) <= ss.tol);
  CHECK(std::abs(rhs_molecule(ss.state, m)(0)) <= ss.tol);
  const Trajectory traj = evolve(SystemState::cold(1, 1), m, {0.0, 2000.0});
  CHECK(traj.states.back().photons(0, 0).real() ==
        doctest::Approx(ss.state.photons(0, 0).real()).epsilon(1e-6));
}

TEST_CASE("steady state of the reference cavity") {
  const BuiltModel built = build_model(ModelSpec{});
  const SteadyState ss = steady_state(built.system);
  REQUIRE(ss.converged);
  CHECK(rhs_photon(ss.state, built.system).cwiseAbs().maxCoeff() <= ss.tol);
  CHECK(rhs_molecule(ss.state, built.system).cwiseAbs().maxCoeff() <= ss.tol);
  const Eigen::VectorXd n = ss.state.photons.diagonal().real();
  Eigen::Index top = 0;
  n.maxCoeff(&top);
  CHECK(top == 0);
  CHECK(n(2) > n(1));
}

TEST_CASE("non-convergence carries the residual history") {
  const BuiltModel built = build_model(test::small_spec());
  SteadyStateOptions o;
  o.max_iterations = 2;
  try {
    steady_state(built.system, o);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.kind() == ErrorKind::kConvergence);
    CHECK_FALSE(e.residual_history().empty());
  }
}

TEST_CASE("invalid states are refused") {
  SystemState s = SystemState::cold(2, 1);
  s.photons(0, 1) = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SystemState::cold(2, 1);
  s.excitation(0) = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
}
