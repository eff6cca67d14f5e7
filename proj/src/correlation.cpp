#include "pbec/correlation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "pbec/ode.hpp"

namespace pbec {

using cd = std::complex<double>;

double CorrelationGenerator::spectral_abscissa() const {
  return matrix.eigenvalues().real().maxCoeff();
}

Eigen::MatrixXcd generator_matrix(const SystemState& state, const SystemModel& model) {
  const DerivedFields d = derived_fields(state, model);
  Eigen::MatrixXcd g = (0.5 * (d.f_plus * model.emission.asDiagonal() -
                               d.f_minus * model.absorption.asDiagonal()))
                           .cast<cd>();
  g.diagonal().array() +=
      (cd(0.0, 1.0) * model.detuning.cast<cd>()).array() - 0.5 * model.pump.loss;
  return g;
}

CorrelationGenerator build_generator(const SteadyState& ss, const SystemModel& model) {
  if (!ss.converged || ss.photon_residual > ss.tol || ss.molecule_residual > ss.tol) {
    std::ostringstream msg;
    msg << "correlation generator needs a converged steady state (photon residual "
        << ss.photon_residual << ", molecule residual " << ss.molecule_residual << ", tol "
        << ss.tol << ")";
    throw Error(ErrorKind::kConvergence, msg.str());
  }
  CorrelationGenerator gen;
  gen.matrix = generator_matrix(ss.state, model);
  gen.initial = ss.state.photons;
  gen.steady_residual = std::max(ss.photon_residual, ss.molecule_residual);
  return gen;
}

GeneratorEigensystem decompose(const Eigen::MatrixXcd& g) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(g);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::kConvergence, "eigen-decomposition of the generator failed");
  }
  GeneratorEigensystem eig;
  eig.values = solver.eigenvalues();
  eig.vectors = solver.eigenvectors();
  const Eigen::VectorXd sv = eig.vectors.jacobiSvd().singularValues();
  eig.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                          : std::numeric_limits<double>::infinity();
  eig.inverse = eig.vectors.partialPivLu().inverse();
  return eig;
}

std::vector<std::complex<double>> CorrelationTrajectory::trace(int p, int q) const {
  std::vector<cd> out;
  out.reserve(c.size());
  for (const auto& m : c) out.push_back(m(p, q));
  return out;
}

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw contract_error("time grid is empty");
  if (grid.front() != 0.0) throw contract_error("time grid must start at t = 0");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw contract_error("time grid must be strictly increasing");
  }
}

std::vector<Eigen::MatrixXcd> propagate_eigen(const GeneratorEigensystem& eig,
                                              const Eigen::MatrixXcd& c0,
                                              const std::vector<double>& grid) {
  const Eigen::MatrixXcd w = eig.inverse * c0;
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(grid.size());
  out.push_back(c0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const Eigen::VectorXcd phase = (eig.values * grid[k]).array().exp();
    out.push_back(eig.vectors * (phase.asDiagonal() * w));
  }
  return out;
}

std::vector<Eigen::MatrixXcd> propagate_exponential(const Eigen::MatrixXcd& g,
                                                    const Eigen::MatrixXcd& c0,
                                                    const std::vector<double>& grid) {
  std::map<double, Eigen::MatrixXcd> steps;
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(grid.size());
  out.push_back(c0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    auto it = steps.find(dt);
    if (it == steps.end()) it = steps.emplace(dt, (g * dt).exp().eval()).first;
    out.push_back(it->second * out.back());
  }
  return out;
}

std::vector<Eigen::MatrixXcd> propagate_runge_kutta(const Eigen::MatrixXcd& g,
                                                    const Eigen::MatrixXcd& c0,
                                                    const std::vector<double>& grid,
                                                    double rtol) {
  const auto m = g.rows();
  ode::Options opt;
  opt.rtol = rtol;
  opt.atol = rtol * std::max(1e-300, c0.cwiseAbs().maxCoeff());
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(grid.size());
  const Eigen::VectorXcd y0 = Eigen::Map<const Eigen::VectorXcd>(c0.data(), c0.size());
  ode::dopri5(
      [&](double, const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
        const Eigen::MatrixXcd c = g * Eigen::Map<const Eigen::MatrixXcd>(y.data(), m, m);
        return Eigen::Map<const Eigen::VectorXcd>(c.data(), c.size());
      },
      y0, std::span<const double>(grid), opt,
      [&](std::size_t, double, const Eigen::VectorXcd& y) {
        out.emplace_back(Eigen::Map<const Eigen::MatrixXcd>(y.data(), m, m));
      });
  return out;
}

}  // namespace

CorrelationTrajectory propagate(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0,
                                const std::vector<double>& grid,
                                const PropagateOptions& options) {
  if (g.rows() != g.cols() || c0.rows() != g.rows() || c0.cols() != g.rows()) {
    throw contract_error("propagate: generator and initial correlation dimensions differ");
  }
  check_grid(grid);
  CorrelationTrajectory traj;
  traj.time = grid;
  const GeneratorEigensystem eig = decompose(g);
  traj.condition = eig.condition;
  auto direct = [&] {
    return options.direct == DirectMethod::kMatrixExponential
               ? propagate_exponential(g, c0, grid)
               : propagate_runge_kutta(g, c0, grid, options.rtol);
  };

  if (!(eig.condition <= options.condition_limit)) {
    std::ostringstream msg;
    msg << "eigenvector matrix condition number " << eig.condition
        << " exceeds the limit; using direct integration only";
    traj.log.push_back(msg.str());
    traj.path = PropagationPath::kDirect;
    traj.c = direct();
    traj.c.front() = c0;
    return traj;
  }

  traj.path = PropagationPath::kEigen;
  traj.c = propagate_eigen(eig, c0, grid);
  if (options.cross_check) {
    const std::vector<Eigen::MatrixXcd> other = direct();
    const double scale = std::max(c0.cwiseAbs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      worst = std::max(worst, (traj.c[k] - other[k]).cwiseAbs().maxCoeff() / scale);
    }
    traj.path_discrepancy = worst;
    if (!(worst <= options.agreement_tol)) {
      std::ostringstream msg;
      msg << "eigen and direct propagation disagree: relative max-norm " << worst
          << " > " << options.agreement_tol;
      throw Error(ErrorKind::kVerification, msg.str());
    }
  }
  return traj;
}

std::vector<double> default_time_grid(const Eigen::MatrixXcd& g, int samples,
                                      double decay_multiple) {
  if (samples < 2) throw contract_error("time grid needs at least two samples");
  const double slowest = g.eigenvalues().real().maxCoeff();
  if (!(slowest < 0.0)) {
    throw Error(ErrorKind::kConvergence,
                "generator has a non-decaying eigenvalue (Re lambda = " +
                    std::to_string(slowest) + " THz)");
  }
  const double end = decay_multiple / -slowest;
  std::vector<double> grid(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) grid[k] = end * k / (samples - 1);
  return grid;
}

std::complex<double> ModeExpansion::operator()(double t) const {
  return (weight.array() * (rate.array() * t).exp()).sum();
}

double ModeExpansion::spectrum(double omega) const {
  cd total = 0.0;
  for (Eigen::Index k = 0; k < weight.size(); ++k) {
    total -= weight[k] / (rate[k] + cd(0.0, omega));
  }
  return 2.0 * total.real();
}

double ModeExpansion::slowest_significant_decay(double fraction) const {
  const double total = weight.cwiseAbs().sum();
  double slowest = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < weight.size(); ++k) {
    if (std::abs(weight[k]) >= fraction * total) slowest = std::min(slowest, -rate[k].real());
  }
  return slowest;
}

std::vector<ModeExpansion> mode_expansions(const GeneratorEigensystem& eig,
                                           const Eigen::MatrixXcd& c0) {
  const Eigen::MatrixXcd w = eig.inverse * c0;
  std::vector<ModeExpansion> out(static_cast<std::size_t>(c0.rows()));
  for (Eigen::Index p = 0; p < c0.rows(); ++p) {
    out[p].rate = eig.values;
    out[p].weight = eig.vectors.row(p).transpose().cwiseProduct(w.col(p));
  }
  return out;
}

double transform_spectrum(const std::vector<double>& time, const std::vector<cd>& trace,
                          double omega) {
  if (time.size() != trace.size() || time.size() < 2) {
    throw contract_error("transform_spectrum: need matching time and trace samples");
  }
  cd total = 0.0;
  for (std::size_t k = 1; k < time.size(); ++k) {
    const double dt = time[k] - time[k - 1];
    total += 0.5 * dt *
             (trace[k - 1] * std::exp(cd(0.0, omega * time[k - 1])) +
              trace[k] * std::exp(cd(0.0, omega * time[k])));
  }
  return 2.0 * total.real();
}

namespace {

std::vector<double> spectral_grid(const Eigen::VectorXcd& poles, const SpectrumOptions& opt) {
  std::vector<double> grid;
  const double edge = std::atan(opt.span);
  for (Eigen::Index k = 0; k < poles.size(); ++k) {
    const double half = -poles[k].real();
    const double center = -poles[k].imag();
    for (int j = 0; j < opt.points_per_pole; ++j) {
      const double theta = -edge + 2.0 * edge * j / (opt.points_per_pole - 1);
      grid.push_back(center + half * std::tan(theta));
    }
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> unique;
  unique.reserve(grid.size());
  for (double w : grid) {
    if (unique.empty() || w - unique.back() > 1e-13 * std::max(1.0, std::abs(w))) {
      unique.push_back(w);
    }
  }
  return unique;
}

struct PeakShape {
  double omega = 0.0;
  double value = 0.0;
  double fwhm = std::numeric_limits<double>::quiet_NaN();
};

// Linewidth of the line belonging to mode p: the local maximum of S_p nearest
// to the mode's own pole. Lines of other modes that leak into S_p through
// inter-mode coherences are separate spectral features and are not measured.
PeakShape peak_shape(const ModeExpansion& mode, std::complex<double> own_pole,
                     const std::vector<double>& grid, const Eigen::VectorXd& sampled) {
  const auto last = static_cast<Eigen::Index>(grid.size()) - 1;
  const double center = -own_pole.imag();
  Eigen::Index best = std::lower_bound(grid.begin(), grid.end(), center) - grid.begin();
  best = std::clamp<Eigen::Index>(best, 0, last);
  // climb to the local maximum
  while (true) {
    if (best < last && sampled[best + 1] > sampled[best]) {
      ++best;
    } else if (best > 0 && sampled[best - 1] > sampled[best]) {
      --best;
    } else {
      break;
    }
  }
  const double lo = grid[std::max<Eigen::Index>(best - 1, 0)];
  const double hi = grid[std::min(best + 1, last)];
  PeakShape shape;
  shape.omega = grid[best];
  shape.value = sampled[best];
  if (hi > lo) {
    const auto refined = boost::math::tools::brent_find_minima(
        [&](double w) { return -mode.spectrum(w); }, lo, hi, 52);
    if (-refined.second > shape.value) {
      shape.omega = refined.first;
      shape.value = -refined.second;
    }
  }
  const double half = 0.5 * shape.value;
  auto edge = [&](int dir) -> double {
    Eigen::Index j = best;
    while (j + dir >= 0 && j + dir <= last && sampled[j + dir] > half) j += dir;
    if (j + dir < 0 || j + dir > last) return std::numeric_limits<double>::quiet_NaN();
    double a = dir > 0 ? std::max(grid[j], shape.omega) : grid[j + dir];
    double b = dir > 0 ? grid[j + dir] : std::min(grid[j], shape.omega);
    std::uintmax_t iterations = 200;
    const auto root = boost::math::tools::toms748_solve(
        [&](double w) { return mode.spectrum(w) - half; }, a, b,
        boost::math::tools::eps_tolerance<double>(50), iterations);
    return 0.5 * (root.first + root.second);
  };
  shape.fwhm = edge(+1) - edge(-1);
  return shape;
}

// Pole whose eigenvector is concentrated most on mode p.
Eigen::Index own_pole(const GeneratorEigensystem& eig, Eigen::Index p) {
  Eigen::Index best = 0;
  (eig.vectors.row(p).cwiseAbs().transpose().array() *
   eig.inverse.col(p).cwiseAbs().array())
      .maxCoeff(&best);
  return best;
}

// c_pp(t) on a uniform grid by exact step propagators applied to column p of c0;
// independent of the eigen-decomposition.
std::vector<cd> sampled_trace(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0, Eigen::Index p,
                              double dt, std::size_t samples, std::vector<double>& time) {
  const Eigen::MatrixXcd step = (g * dt).exp();
  Eigen::VectorXcd col = c0.col(p);
  std::vector<cd> trace(samples);
  time.resize(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    time[k] = dt * static_cast<double>(k);
    trace[k] = col[p];
    col = step * col;
  }
  return trace;
}

}  // namespace

SpectralResult spectrum(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0,
                        const SpectrumOptions& options) {
  if (options.points_per_pole < 3) throw contract_error("spectrum: need >= 3 points per pole");
  const GeneratorEigensystem eig = decompose(g);
  if (!(eig.values.real().maxCoeff() < 0.0)) {
    throw Error(ErrorKind::kConvergence, "spectrum: generator has a non-decaying eigenvalue");
  }
  const std::vector<ModeExpansion> modes = mode_expansions(eig, c0);
  const std::vector<double> grid = spectral_grid(eig.values, options);
  const auto nw = static_cast<Eigen::Index>(grid.size());
  const auto m = c0.rows();

  SpectralResult out;
  out.omega = Eigen::Map<const Eigen::VectorXd>(grid.data(), nw);
  out.spectrum.resize(nw, m);
  out.peak_omega.setConstant(m, std::numeric_limits<double>::quiet_NaN());
  out.peak_value.setZero(m);
  out.fwhm.setConstant(m, std::numeric_limits<double>::quiet_NaN());
  out.normalization.setZero(m);
  out.transform_peak.setConstant(m, std::numeric_limits<double>::quiet_NaN());

  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index j = 0; j < nw; ++j) out.spectrum(j, p) = modes[p].spectrum(grid[j]);
    // The tan-mapped grid is far too coarse in the tails for a trapezoid
    // rule, so each interval is integrated adaptively.
    double integral = 0.0;
    for (Eigen::Index j = 1; j < nw; ++j) {
      integral += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          [&](double w) { return modes[p].spectrum(w); }, grid[j - 1], grid[j], 3, 1e-8);
    }
    out.normalization[p] = integral / (2.0 * std::numbers::pi);
    if (!(c0(p, p).real() > 0.0)) {
      out.warnings.push_back("mode " + std::to_string(p) + " is empty; no linewidth");
      continue;
    }
    const PeakShape shape =
        peak_shape(modes[p], eig.values[own_pole(eig, p)], grid, out.spectrum.col(p));
    out.peak_omega[p] = shape.omega;
    out.peak_value[p] = shape.value;
    out.fwhm[p] = shape.fwhm;

    if (!options.transform_check) continue;
    // Every component of the trace must be both resolved and decayed, or a
    // slow line leaking in from another mode aliases onto the peak.
    const ModeExpansion& mode = modes[p];
    double slowest = std::numeric_limits<double>::infinity();
    double fastest = 0.0;
    const double total = mode.weight.cwiseAbs().sum();
    for (Eigen::Index k = 0; k < mode.weight.size(); ++k) {
      if (std::abs(mode.weight[k]) < 1e-12 * total) continue;
      slowest = std::min(slowest, -mode.rate[k].real());
      fastest = std::max(fastest, std::abs(mode.rate[k].imag() + shape.omega) -
                                      mode.rate[k].real());
    }
    const double end = 12.0 / slowest;
    const double dt = std::min(end / options.transform_samples,
                               std::numbers::pi / (8.0 * std::max(fastest, 1e-300)));
    const auto samples = static_cast<std::size_t>(
        std::min(std::ceil(end / dt) + 1.0, static_cast<double>(options.max_transform_samples)));
    std::vector<double> time;
    const std::vector<cd> trace = sampled_trace(g, c0, p, dt, samples, time);
    if (std::abs(trace.back()) > 1e-3 * std::abs(trace.front())) {
      out.warnings.push_back("mode " + std::to_string(p) +
                             ": sampled correlation not decayed; transform is truncation broadened");
    }
    out.transform_peak[p] = transform_spectrum(time, trace, shape.omega);
    const double rel = std::abs(out.transform_peak[p] - shape.value) / shape.value;
    if (!(rel <= options.transform_tol)) {
      std::ostringstream msg;
      msg << "mode " << p << ": analytic and transformed spectra differ by " << 100.0 * rel
          << "% at the peak";
      throw Error(ErrorKind::kVerification, msg.str());
    }
  }
  return out;
}

CoherenceTime coherence_time(const std::vector<double>& time, const std::vector<cd>& trace) {
  if (time.size() != trace.size() || time.size() < 2) {
    throw contract_error("coherence_time: need matching time and trace samples");
  }
  const double c0 = std::abs(trace.front());
  if (!(c0 > 0.0)) throw validation_error("coherence_time: correlation vanishes at t = 0");
  const double target = c0 / std::numbers::e;
  CoherenceTime out;
  bool found = false;
  for (std::size_t k = 1; k < time.size(); ++k) {
    const double a = std::abs(trace[k - 1]);
    const double b = std::abs(trace[k]);
    if (b <= target) {
      // log-linear interpolation is exact for a pure exponential
      const double s = b > 0.0 ? std::log(a / target) / std::log(a / b) : 0.0;
      out.crossing = time[k - 1] + s * (time[k] - time[k - 1]);
      found = true;
      break;
    }
  }
  if (!found) {
    throw Error(ErrorKind::kConvergence,
                "correlation never falls below 1/e of its initial value within " +
                    std::to_string(time.back()) + " ps; propagate over a longer grid");
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < time.size(); ++k) {
    const double r = std::abs(trace[k]) / c0;
    if (r < 0.1 || r > 0.9) continue;
    const double y = std::log(r);
    sx += time[k];
    sy += y;
    sxx += time[k] * time[k];
    sxy += time[k] * y;
    ++count;
  }
  if (count >= 2) {
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    out.fitted = slope < 0.0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
  } else {
    out.fitted = std::numeric_limits<double>::quiet_NaN();
  }
  out.non_exponential =
      !(std::abs(out.fitted - out.crossing) <= 0.1 * out.crossing);
  out.truncated = std::abs(trace.back()) > 1e-3 * c0;
  return out;
}

std::vector<CoherenceTime> coherence_times(const CorrelationTrajectory& traj) {
  std::vector<CoherenceTime> out;
  if (traj.c.empty()) return out;
  for (Eigen::Index p = 0; p < traj.c.front().rows(); ++p) {
    out.push_back(coherence_time(traj.time, traj.trace(static_cast<int>(p), static_cast<int>(p))));
  }
  return out;
}

std::vector<CoherenceTime> coherence_times(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& c0,
                                           int samples, double decay_multiple) {
  const GeneratorEigensystem eig = decompose(g);
  const std::vector<ModeExpansion> modes = mode_expansions(eig, c0);
  std::vector<CoherenceTime> out;
  for (const auto& mode : modes) {
    const double end = decay_multiple / mode.slowest_significant_decay();
    std::vector<double> time(static_cast<std::size_t>(samples));
    std::vector<cd> trace(time.size());
    for (int k = 0; k < samples; ++k) {
      time[k] = end * k / (samples - 1);
      trace[k] = mode(time[k]);
    }
    out.push_back(coherence_time(time, trace));
  }
  return out;
}

Eigen::MatrixXcd analysis_initial(const Eigen::MatrixXcd& c0, std::vector<int>* seeded) {
  Eigen::MatrixXcd out = c0;
  for (Eigen::Index p = 0; p < c0.rows(); ++p) {
    if (std::abs(c0(p, p)) > 0.0) continue;
    out(p, p) = 1.0;
    if (seeded) seeded->push_back(static_cast<int>(p));
  }
  return out;
}

CoherenceAnalysis analyze_coherence(const SteadyState& ss, const SystemModel& model,
                                    const CoherenceOptions& options) {
  CoherenceAnalysis out;
  out.generator = build_generator(ss, model);
  out.initial = analysis_initial(out.generator.initial, &out.seeded);
  const auto& g = out.generator.matrix;
  const auto& c0 = out.initial;
  out.trajectory = propagate(g, c0, default_time_grid(g, options.samples, options.decay_multiple),
                             options.propagate);
  out.spectral = spectrum(g, c0, options.spectrum);
  out.tau = coherence_times(g, c0, options.samples, options.decay_multiple);
  return out;
}

std::vector<SweepRow> sweep_cutoff(const ModelSpec& base, const std::vector<double>& omega0,
                                   const std::vector<double>& pump_ratio,
                                   const SweepOptions& options,
                                   const std::function<void(const SweepRow&)>& on_row) {
  if (omega0.empty() || pump_ratio.empty()) {
    throw validation_error("sweep needs at least one cutoff and one pump ratio");
  }
  std::vector<SweepRow> rows;
  for (double w : omega0) {
    for (double r : pump_ratio) {
      SweepRow row;
      row.omega0 = w;
      row.pump_ratio = r;
      rows.push_back(row);
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex emit;
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      SweepRow& row = rows[k];
      try {
        ModelSpec spec = base;
        spec.omega0 = row.omega0;
        spec.pump_ratio = row.pump_ratio;
        const BuiltModel built = build_model(spec);
        const SteadyState ss = steady_state(built.system, options.steady);
        row.n00 = ss.state.photons(0, 0).real();
        CorrelationGenerator gen = build_generator(ss, built.system);
        const Eigen::MatrixXcd c0 = analysis_initial(gen.initial);
        const std::vector<CoherenceTime> tau = coherence_times(
            gen.matrix, c0, options.coherence.samples, options.coherence.decay_multiple);
        const SpectralResult spec_result = spectrum(gen.matrix, c0, options.coherence.spectrum);
        row.tau0 = tau.front().crossing;
        row.fwhm0 = spec_result.fwhm[0];
        row.converged = true;
      } catch (const std::exception& e) {
        row.converged = false;
        row.error = e.what();
      }
      if (on_row) {
        std::lock_guard<std::mutex> lock(emit);
        on_row(row);
      }
    }
  };
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(rows.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (std::none_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.converged; })) {
    throw Error(ErrorKind::kConvergence, "every sweep point failed; first error: " + rows.front().error);
  }
  return rows;
}

}  // namespace pbec
