#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbec/semiclassical.hpp"
#include "pbec/system.hpp"

namespace pbec {

// Linear generator of the two-time photon correlation c_pq(t) = <a_p^dag(t) a_q(0)>:
//   dc/dt = G c,  G_pm = (i delta_p - kappa/2) delta_pm + (E_m/2) f+_mp - (A_m/2) f-_mp,
// with the molecular excitation frozen at its steady-state value.
struct CorrelationGenerator {
  Eigen::MatrixXcd matrix;
  Eigen::MatrixXcd initial;  // n_ss, the zero-delay value of c
  double steady_residual = 0.0;

  int modes() const { return static_cast<int>(matrix.rows()); }
  // Largest real part of the eigenvalues.
  double spectral_abscissa() const;
};

// Refuses (convergence error) a steady state that did not converge or whose
// recorded residuals exceed its tolerance.
CorrelationGenerator build_generator(const SteadyState& ss, const SystemModel& model);
// Unchecked variant for arbitrary molecular states.
Eigen::MatrixXcd generator_matrix(const SystemState& state, const SystemModel& model);

struct GeneratorEigensystem {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
  Eigen::MatrixXcd inverse;
  double condition = 0.0;  // 2-norm condition number of the eigenvector matrix
};

GeneratorEigensystem decompose(const Eigen::MatrixXcd& g);

enum class PropagationPath { kEigen, kDirect };
enum class DirectMethod {
  kMatrixExponential,  // exact step propagators exp(G dt) from scaling and squaring
  kRungeKutta,         // adaptive Dormand-Prince; only practical for short grids
};

struct PropagateOptions {
  double agreement_tol = 1e-6;   // relative max-norm between the two paths
  double condition_limit = 1e12;
  DirectMethod direct = DirectMethod::kMatrixExponential;
  double rtol = 1e-11;  // Runge-Kutta path only
  bool cross_check = true;

  bool operator==(const PropagateOptions&) const = default;
};

struct CorrelationTrajectory {
  std::vector<double> time;
  std::vector<Eigen::MatrixXcd> c;
  PropagationPath path = PropagationPath::kEigen;
  double condition = 0.0;
  // max_t ||c_eigen(t) - c_direct(t)||_max / ||c(0)||_max, or -1 if not checked
  double path_discrepancy = -1.0;
  std::vector<std::string> log;

  std::vector<std::complex<double>> trace(int p, int q) const;
};

// Solves dc/dt = G c on the grid by eigen-decomposition and by direct
// integration. The eigen result is returned unless the eigenvector matrix is
// ill conditioned, in which case only the direct path runs and the trajectory
// is flagged. Disagreement above agreement_tol is a verification error.
CorrelationTrajectory propagate(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0,
                                const std::vector<double>& grid,
                                const PropagateOptions& options = {});

// `samples` points over [0, decay_multiple / |Re lambda|] for the slowest
// decaying eigenvalue.
std::vector<double> default_time_grid(const Eigen::MatrixXcd& g, int samples = 4096,
                                      double decay_multiple = 12.0);

// c_pp(t) as a sum of damped exponentials: c_pp(t) = sum_k weight_k exp(rate_k t).
struct ModeExpansion {
  Eigen::VectorXcd weight;
  Eigen::VectorXcd rate;

  std::complex<double> operator()(double t) const;
  // S(omega) = 2 Re int_0^inf c(t) exp(i omega t) dt
  double spectrum(double omega) const;
  // Slowest decay rate among terms carrying at least `fraction` of the weight.
  double slowest_significant_decay(double fraction = 1e-3) const;
};

std::vector<ModeExpansion> mode_expansions(const GeneratorEigensystem& eig,
                                           const Eigen::MatrixXcd& c0);

struct SpectrumOptions {
  int points_per_pole = 401;
  double span = 4000.0;      // grid half-width around each pole in units of its half width
  int transform_samples = 8192;  // minimum samples of the transform check
  std::size_t max_transform_samples = std::size_t{1} << 22;
  double transform_tol = 0.02;  // relative, at the peak
  bool transform_check = true;

  bool operator==(const SpectrumOptions&) const = default;
};

struct SpectralResult {
  Eigen::VectorXd omega;     // THz, S_p peaks at omega = -delta_p
  Eigen::MatrixXd spectrum;  // frequency x mode, ps
  Eigen::VectorXd peak_omega;
  Eigen::VectorXd peak_value;
  Eigen::VectorXd fwhm;           // THz
  Eigen::VectorXd normalization;  // (1/2pi) int S_p d omega over the grid span
  Eigen::VectorXd transform_peak;  // peak value from the sampled transform
  std::vector<std::string> warnings;
};

// Analytic sum of Lorentzians from the eigen-decomposition, evaluated on a
// union of per-pole tangent-mapped grids; the peak of every mode is
// cross-checked by a direct transform of the sampled correlation.
SpectralResult spectrum(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0,
                        const SpectrumOptions& options = {});

// Trapezoid evaluation of 2 Re sum_k w_k c(t_k) exp(i omega t_k).
double transform_spectrum(const std::vector<double>& time,
                          const std::vector<std::complex<double>>& trace, double omega);

struct CoherenceTime {
  double crossing = 0.0;  // ps, first 1/e crossing of |c(t)|
  double fitted = 0.0;    // ps, -1/slope of log|c| where |c| in [0.1, 0.9] c(0)
  bool non_exponential = false;
  bool truncated = false;  // |c(T_end)| > 1e-3 |c(0)|
};

// Throws a convergence error if |c| never falls below c(0)/e on the grid.
CoherenceTime coherence_time(const std::vector<double>& time,
                             const std::vector<std::complex<double>>& trace);
std::vector<CoherenceTime> coherence_times(const CorrelationTrajectory& traj);

// Per-mode coherence times, each from its own trace resolved over
// decay_multiple slowest significant decay times.
std::vector<CoherenceTime> coherence_times(const Eigen::MatrixXcd& g,
                                           const Eigen::MatrixXcd& c0, int samples = 4096,
                                           double decay_multiple = 12.0);

// Initial value used for the analysis: n_ss, with a unit seed on the diagonal
// of every mode whose population is exactly zero (its correlation would
// vanish identically, e.g. an uncoupled cavity). Seeded modes are listed.
Eigen::MatrixXcd analysis_initial(const Eigen::MatrixXcd& c0, std::vector<int>* seeded = nullptr);

// Everything downstream of a steady state for one configuration.
struct CoherenceAnalysis {
  CorrelationGenerator generator;
  Eigen::MatrixXcd initial;  // analysis_initial(generator.initial)
  std::vector<int> seeded;
  CorrelationTrajectory trajectory;
  SpectralResult spectral;
  std::vector<CoherenceTime> tau;
};

struct CoherenceOptions {
  int samples = 4096;
  double decay_multiple = 12.0;
  PropagateOptions propagate;
  SpectrumOptions spectrum;

  bool operator==(const CoherenceOptions&) const = default;
};

CoherenceAnalysis analyze_coherence(const SteadyState& ss, const SystemModel& model,
                                    const CoherenceOptions& options = {});

struct SweepRow {
  double omega0 = 0.0;
  double pump_ratio = 0.0;
  double tau0 = 0.0;  // ps
  double fwhm0 = 0.0;  // THz
  double n00 = 0.0;
  bool converged = false;
  std::string error;
};

struct SweepOptions {
  int threads = 1;
  SteadyStateOptions steady;
  CoherenceOptions coherence;
};

// Full pipeline per (omega0, pump ratio) point. Failed points are returned
// with converged = false and a diagnostic; `on_row` is called (serialized) as
// each point completes. Rows come back ordered by omega0, then pump ratio.
// Throws only when every point fails.
std::vector<SweepRow> sweep_cutoff(const ModelSpec& base, const std::vector<double>& omega0,
                                   const std::vector<double>& pump_ratio,
                                   const SweepOptions& options = {},
                                   const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace pbec
