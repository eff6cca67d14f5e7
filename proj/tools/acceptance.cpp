// One line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "pbec/config.hpp"
#include "pbec/correlation.hpp"
#include "pbec/oracle.hpp"
#include "pbec/semiclassical.hpp"
#include "pbec/system.hpp"

using namespace pbec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

RunConfig reference(const std::string& name) {
  return load_config(std::string(PBEC_SOURCE_DIR) + "/configs/" + name + ".ini");
}

struct Solved {
  BuiltModel built;
  SteadyState ss;
  CorrelationGenerator gen;
};

Solved solve(const RunConfig& cfg, double ratio) {
  ModelSpec spec = cfg.model;
  spec.pump_ratio = ratio;
  Solved s{build_model(spec), {}, {}};
  s.ss = steady_state(s.built.system, cfg.steady);
  s.gen = build_generator(s.ss, s.built.system);
  return s;
}

// Every parameter set the criteria below run on.
std::vector<Solved> reference_set() {
  std::vector<Solved> out;
  for (const char* name : {"fig1", "pump_series", "thermal", "bare_cavity"}) {
    const RunConfig cfg = reference(name);
    for (double r : cfg.pump_ratios) out.push_back(solve(cfg, r));
  }
  return out;
}

Outcome kennard_stepanov() {
  double worst = 0.0;
  int sets = 0;
  auto check = [&](const ModelSpec& spec) {
    const BuiltModel b = build_model(spec);
    for (int p = 0; p < b.basis.modes(); ++p) {
      const double expect = b.rates.emission(p) * std::exp(-b.rates.beta * b.basis.detuning(p));
      worst = std::max(worst, std::abs(b.rates.absorption(p) - expect) / expect);
    }
    ++sets;
  };
  for (const char* name : {"fig1", "thermal", "bare_cavity"}) check(reference(name).model);
  const RunConfig sweep = reference("cutoff_sweep");
  for (double w : sweep.sweep.omega0) {
    ModelSpec spec = sweep.model;
    spec.omega0 = w;
    check(spec);
  }
  return {worst <= 0.0, fmt("max relative |A - E exp(-beta delta)| = %.3g over %.0f rate sets (tol 0)",
                            worst, sets)};
}

Outcome hermiticity_positivity() {
  double herm = 0.0;
  double min_n = 0.0;
  int samples = 0;
  // cold start through the condensation transient of the reference cavity;
  // the explicit integrator resolves the ~100 THz rotations, so the horizons
  // stay short
  for (const auto& [name, horizon] : {std::pair{"fig1", 2e4}, std::pair{"thermal", 2e3}}) {
    const RunConfig cfg = reference(name);
    const BuiltModel b = build_model(cfg.model);
    std::vector<double> times;
    for (int k = 0; k <= 60; ++k) times.push_back(horizon * k / 60.0);
    const Trajectory traj = evolve(SystemState::cold(b.system.modes(), b.system.sites()), b.system, times);
    for (const auto& s : traj.states) {
      herm = std::max(herm, s.hermiticity_defect());
      min_n = std::min(min_n, s.photons.diagonal().real().minCoeff());
      ++samples;
    }
  }
  return {herm <= 1e-10 && min_n >= -1e-9,
          fmt("max ||n - n^dag|| = %.3g (tol 1e-10), min n_pp = %.3g (tol -1e-9), %.0f samples",
              herm, min_n, samples)};
}

Outcome zero_delay(const std::vector<Solved>& set) {
  double worst = 0.0;
  for (const auto& s : set) {
    const CorrelationTrajectory traj =
        propagate(s.gen.matrix, s.gen.initial, {0.0, 1.0});
    worst = std::max(worst, (traj.c.front() - s.ss.state.photons).cwiseAbs().maxCoeff());
    worst = std::max(worst, (s.gen.initial - s.ss.state.photons).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12,
          fmt("max |c(0) - n_ss| = %.3g over %.0f configs (tol 1e-12)", worst, double(set.size()))};
}

Outcome dual_path(const Solved& ref) {
  const CorrelationTrajectory traj =
      propagate(ref.gen.matrix, ref.gen.initial, default_time_grid(ref.gen.matrix));
  const bool eigen = traj.path == PropagationPath::kEigen;
  return {eigen && traj.path_discrepancy >= 0.0 && traj.path_discrepancy <= 1e-6,
          fmt("relative max-norm discrepancy = %.3g (tol 1e-6), %.0f modes, condition %.3g",
              traj.path_discrepancy, ref.gen.modes(), traj.condition)};
}

Outcome normalization(const Solved& ref) {
  const SpectralResult sp = spectrum(ref.gen.matrix, ref.gen.initial);
  double worst = 0.0;
  for (int p = 0; p < ref.gen.modes(); ++p) {
    const double n = ref.ss.state.photons(p, p).real();
    worst = std::max(worst, std::abs(sp.normalization(p) - n) / n);
  }
  return {worst <= 0.01, fmt("max relative |(1/2pi) int S_p - n_pp| = %.3g (tol 0.01)", worst)};
}

Outcome stripe() {
  const VerifyConfig v = reference("verify").verify;
  const StripeReport report = verify_stripe_contributions(v.stripe_model(), v.seed);
  double worst = 0.0;
  int terms = 0;
  for (const auto& t : report.terms) {
    if (t.diagnostic) continue;
    worst = std::max(worst, t.residual);
    ++terms;
  }
  return {report.passed() && worst <= 1e-12,
          fmt("max residual = %.3g over %.0f terms at M=2 N=3 n_max=3 (tol 1e-12)", worst, terms)};
}

Outcome oracle_agreement() {
  const VerifyConfig v = reference("verify").verify;
  const auto rows = verify_semiclassical_limit(v.family, {2, 4, 8});
  bool monotone = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    monotone = monotone && rows[k].population_discrepancy <= rows[k - 1].population_discrepancy;
  }
  const double rate = rows.back().rate_discrepancy;
  return {monotone && rate <= 0.25,
          fmt("rate discrepancy at N=8 = %.3g (tol 0.25); population discrepancy %.3g -> %.3g, ",
              rate, rows.front().population_discrepancy, rows.back().population_discrepancy) +
              (monotone ? "non-increasing" : "increasing")};
}

Outcome fig1_shape(const Solved& ref) {
  const SpectralResult sp = spectrum(ref.gen.matrix, ref.gen.initial);
  const auto n = ref.ss.state.photons.diagonal().real();
  const bool ok = sp.fwhm(0) < sp.fwhm(1) && sp.fwhm(0) < sp.fwhm(2) && n(2) > n(1);
  return {ok, fmt("FWHM_0 = %.3g, FWHM_1 = %.3g, FWHM_2 = %.3g THz; ", sp.fwhm(0), sp.fwhm(1),
                  sp.fwhm(2)) +
                  fmt("n_11 = %.4g, n_22 = %.4g", n(1), n(2))};
}

Outcome fig2_shape() {
  const RunConfig cfg = reference("pump_series");
  std::vector<double> tau;
  for (double r : {0.1, 0.2, 0.4}) {
    const Solved s = solve(cfg, r);
    tau.push_back(coherence_times(s.gen.matrix, s.gen.initial).front().crossing);
  }
  return {tau[0] < tau[1] && tau[1] < tau[2],
          fmt("tau_0 = %.4g, %.4g, %.4g ps at pump 0.1, 0.2, 0.4", tau[0], tau[1], tau[2])};
}

Outcome fig3_shape() {
  const RunConfig cfg = reference("cutoff_sweep");
  SweepOptions opt;
  opt.threads = cfg.sweep.threads;
  opt.steady = cfg.steady;
  opt.coherence = cfg.coherence;
  const auto rows = sweep_cutoff(cfg.model, cfg.sweep.omega0, cfg.sweep.pump_ratio, opt);
  const double lo = cfg.sweep.omega0.front(), hi = cfg.sweep.omega0.back();
  std::string found;
  int converged = 0;
  for (const auto& row : rows) converged += row.converged;
  for (double r : cfg.sweep.pump_ratio) {
    std::vector<double> tau;
    for (const auto& row : rows) {
      if (row.pump_ratio == r) tau.push_back(row.converged ? row.tau0 : std::nan(""));
    }
    for (std::size_t k = 1; k + 1 < tau.size(); ++k) {
      const double a = tau[k] - tau[k - 1], b = tau[k + 1] - tau[k];
      if (a * b < 0.0) {
        found += (found.empty() ? " " : ", ") + fmt("%.4g THz (pump %.2g)", cfg.sweep.omega0[k], r);
        break;
      }
    }
  }
  const bool window = cfg.sweep.omega0.size() >= 15 && lo <= 500.0 && hi >= 540.0;
  return {window && !found.empty(),
          fmt("%.0f cutoffs over [%.4g, %.4g] THz, ", double(cfg.sweep.omega0.size()), lo, hi) +
              fmt("%.0f/%.0f points converged; ", converged, double(rows.size())) +
              (found.empty() ? "no interior extremum" : "first interior extremum at" + found)};
}

Outcome thermal_tail() {
  const RunConfig cfg = reference("thermal");
  const Solved s = solve(cfg, cfg.pump_ratios.front());
  const int count = 6;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> y(count);
  for (int p = 0; p < count; ++p) {
    y[p] = std::log1p(1.0 / s.ss.state.photons(p, p).real());
    sx += p;
    sy += y[p];
    sxx += p * p;
    sxy += p * y[p];
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / count;
  double misfit = 0.0;
  for (int p = 0; p < count; ++p) misfit = std::max(misfit, std::abs(intercept + slope * p - y[p]));
  const double target = cfg.model.beta * cfg.model.spacing;
  const double rel = std::abs(slope - target) / target;
  // linearity: no point further from the fit than 10% of one step
  return {rel <= 0.1 && misfit <= 0.1 * target,
          fmt("slope = %.5g vs beta*dw = %.5g (rel %.3g, tol 0.1); ", slope, target, rel) +
              fmt("max misfit %.3g (tol %.3g)", misfit, 0.1 * target)};
}

Outcome bare_cavity() {
  const RunConfig cfg = reference("bare_cavity");
  const Solved s = solve(cfg, cfg.pump_ratios.front());
  const CoherenceAnalysis an = analyze_coherence(s.ss, s.built.system, cfg.coherence);
  const double kappa = cfg.model.loss;
  double tau_err = 0.0, width_err = 0.0, shape_err = 0.0;
  for (int p = 0; p < s.gen.modes(); ++p) {
    tau_err = std::max(tau_err, std::abs(an.tau[p].crossing * kappa / 2.0 - 1.0));
    width_err = std::max(width_err, std::abs(an.spectral.fwhm(p) / kappa - 1.0));
    // Lorentzian of the measured peak and width at every sampled frequency
    const double w0 = an.spectral.peak_omega(p), peak = an.spectral.peak_value(p);
    for (Eigen::Index j = 0; j < an.spectral.omega.size(); ++j) {
      const double x = 2.0 * (an.spectral.omega(j) - w0) / kappa;
      shape_err = std::max(shape_err, std::abs(an.spectral.spectrum(j, p) - peak / (1.0 + x * x)) / peak);
    }
  }
  return {tau_err <= 0.01 && width_err <= 0.01 && shape_err <= 0.01,
          fmt("max |tau_p kappa/2 - 1| = %.3g, max |FWHM_p/kappa - 1| = %.3g, ", tau_err, width_err) +
              fmt("max Lorentzian deviation %.3g of peak (tol 0.01 each)", shape_err)};
}

}  // namespace

int main() {
  int failed = 0;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, out.pass ? "PASS" : "FAIL", name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  };

  std::vector<Solved> set;
  run(1, "Kennard-Stepanov identity", kennard_stepanov);
  run(2, "hermiticity and positivity", hermiticity_positivity);
  run(3, "zero-delay identity", [&] {
    set = reference_set();
    return zero_delay(set);
  });
  const RunConfig fig1 = reference("fig1");
  Solved ref;
  run(4, "dual-path propagation", [&] {
    ref = solve(fig1, fig1.pump_ratios.front());
    return dual_path(ref);
  });
  run(5, "spectrum normalization", [&] { return normalization(ref); });
  run(6, "stripe algebra", stripe);
  run(7, "oracle agreement", oracle_agreement);
  run(8, "linewidth and population shape", [&] { return fig1_shape(ref); });
  run(9, "coherence grows with pump", fig2_shape);
  run(10, "non-monotonic cutoff dependence", fig3_shape);
  run(11, "thermal tail", thermal_tail);
  run(12, "bare cavity closed form", bare_cavity);
  std::printf("%d of 12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
