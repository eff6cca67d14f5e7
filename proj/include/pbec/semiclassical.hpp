#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbec/errors.hpp"
#include "pbec/system.hpp"

namespace pbec {

// Photon correlation matrix n_pq = <a_p^dag a_q> and molecular excitation
// fractions f_i.
struct SystemState {
  Eigen::MatrixXcd photons;
  Eigen::VectorXd excitation;

  static SystemState cold(int modes, int sites);

  int modes() const { return static_cast<int>(photons.rows()); }
  int sites() const { return static_cast<int>(excitation.size()); }

  double hermiticity_defect() const;
  // Hermitian to 1e-10, diagonal >= -1e-12, 0 <= f <= 1 within 1e-12.
  void validate() const;
};

struct DerivedFields {
  Eigen::MatrixXd f_plus;               // sum_i W_i f_i Phi_i
  Eigen::MatrixXd f_minus;              // sum_i W_i (1 - f_i) Phi_i
  Eigen::VectorXd stimulated_emission;  // Re Tr[Phi_i E (n + I)]
  Eigen::VectorXd stimulated_absorption;  // Re Tr[Phi_i n A]
};

DerivedFields derived_fields(const SystemState& state, const SystemModel& model);

// dn/dt = B + B^dag with
//   B = (i diag(delta) - kappa/2) n + 1/2 [f+ E (n + I) - f- A n].
Eigen::MatrixXcd rhs_photon(const SystemState& state, const SystemModel& model);

// df_i/dt = -(Gamma_down + E~_i) f_i + (Gamma_up^i + A~_i)(1 - f_i).
Eigen::VectorXd rhs_molecule(const SystemState& state, const SystemModel& model);

// Real coordinates of a state: [n_pp, Re n_pq (p<q), Im n_pq (p<q), f_i].
// Hermiticity is exact in these coordinates.
class StatePacker {
 public:
  StatePacker(int modes, int sites);
  int size() const { return size_; }
  int photon_size() const { return modes_ * modes_; }
  Eigen::VectorXd pack(const SystemState& state) const;
  SystemState unpack(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack_rhs(const Eigen::MatrixXcd& dn, const Eigen::VectorXd& df) const;
  Eigen::VectorXd pack_photons(const Eigen::MatrixXcd& n) const;

 private:
  int modes_;
  int sites_;
  int size_;
};

// Jacobian of the packed right-hand side, block structured:
//   [ photon-photon  photon-molecule ]
//   [ molecule-photon  diag(molecule) ]
struct RateJacobian {
  Eigen::MatrixXd nn;
  Eigen::MatrixXd nf;
  Eigen::MatrixXd fn;
  Eigen::VectorXd ff;

  Eigen::MatrixXd dense() const;
  // Solves (alpha I - J) x = b through the Schur complement on the photon
  // block.
  Eigen::VectorXd solve_shifted(double alpha, const Eigen::VectorXd& b) const;
};

Eigen::VectorXd packed_rhs(const StatePacker& packer, const Eigen::VectorXd& x,
                           const SystemModel& model);
RateJacobian rate_jacobian(const SystemState& state, const SystemModel& model);

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double max_step = 50.0;  // ps
  // Explicit steps allowed before switching to the linearly implicit scheme.
  std::size_t explicit_step_budget = 200'000;
};

struct Trajectory {
  std::vector<double> time;
  std::vector<SystemState> states;
  double max_hermiticity_drift = 0.0;
  bool used_implicit = false;
  std::vector<std::string> log;
};

// Integrates the rate equations, emitting a state at every requested time.
// Starts with Dormand-Prince 5(4); if its step budget runs out the remainder is
// integrated with a two-stage Rosenbrock scheme. rtol must lie in
// [1e-12, 1e-3].
Trajectory evolve(const SystemState& initial, const SystemModel& model,
                  const std::vector<double>& times, const EvolveOptions& options = {});

struct SteadyStateOptions {
  double tol = 1e-10;            // max-norm residual, THz
  double initial_step = 1.0;     // ps
  double min_step = 1e-3;        // ps, below this the change limit is waived
  // Largest accepted relative change of any photon population per step
  // (excitation fractions count five-fold).
  double max_change = 0.5;
  double max_time = 1e12;        // ps of pseudo-time
  int max_iterations = 2000;

  bool operator==(const SteadyStateOptions&) const = default;
};

struct SteadyState {
  SystemState state;
  double photon_residual = 0.0;
  double molecule_residual = 0.0;
  double tol = 0.0;
  bool converged = false;
  int iterations = 0;
  double pseudo_time = 0.0;
  std::vector<double> residual_history;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(ErrorKind::kConvergence, what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Fixed point of the rate equations by pseudo-transient continuation:
// implicit Euler steps whose size grows as the residual falls, which ends in
// Newton iteration. Throws ConvergenceError with the residual history when
// the residual does not drop below tol.
SteadyState steady_state(const SystemModel& model, const SystemState& initial,
                         const SteadyStateOptions& options = {});

inline SteadyState steady_state(const SystemModel& model,
                                const SteadyStateOptions& options = {}) {
  return steady_state(model, SystemState::cold(model.modes(), model.sites()), options);
}

}  // namespace pbec
