#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbec/system.hpp"

namespace pbec::test {

// Single-mode model over explicit sites, each with overlap psi^2 = coupling
// and unit weight.
inline SystemModel scalar_model(double emission, double absorption, double loss,
                                const std::vector<double>& pump, double decay,
                                double coupling = 1.0, double detuning = 0.0) {
  SystemModel m;
  m.detuning = Eigen::VectorXd::Constant(1, detuning);
  m.emission = Eigen::VectorXd::Constant(1, emission);
  m.absorption = Eigen::VectorXd::Constant(1, absorption);
  std::vector<Eigen::MatrixXd> sites(pump.size(), Eigen::MatrixXd::Constant(1, 1, coupling));
  m.overlap = overlap_from_sites(sites);
  m.site_weight = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pump.size()));
  m.pump.pump = Eigen::Map<const Eigen::VectorXd>(pump.data(), Eigen::Index(pump.size()));
  m.pump.decay = decay;
  m.pump.loss = loss;
  return m;
}

// Reduced version of the reference cavity that solves in well under a second.
inline ModelSpec small_spec(int modes = 4) {
  ModelSpec s;
  s.modes = modes;
  s.grid_points = 201;
  return s;
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace pbec::test
