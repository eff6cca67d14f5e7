#include "pbec/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "pbec/ode.hpp"

namespace pbec {

using cd = std::complex<double>;

SystemState SystemState::cold(int modes, int sites) {
  return {Eigen::MatrixXcd::Zero(modes, modes), Eigen::VectorXd::Zero(sites)};
}

double SystemState::hermiticity_defect() const {
  if (photons.size() == 0) return 0.0;
  return (photons - photons.adjoint()).cwiseAbs().maxCoeff();
}

void SystemState::validate() const {
  if (photons.rows() != photons.cols()) throw contract_error("photon matrix is not square");
  if (hermiticity_defect() > 1e-10) {
    throw validation_error("photon matrix is not Hermitian (defect " +
                           std::to_string(hermiticity_defect()) + ")");
  }
  for (int p = 0; p < modes(); ++p) {
    if (photons(p, p).real() < -1e-12) {
      throw validation_error("negative photon population in mode " + std::to_string(p));
    }
  }
  for (int i = 0; i < sites(); ++i) {
    if (excitation[i] < -1e-12 || excitation[i] > 1.0 + 1e-12) {
      throw validation_error("excitation fraction outside [0, 1] at site " +
                             std::to_string(i));
    }
  }
}

namespace {

void check_dimensions(const SystemState& state, const SystemModel& model) {
  if (state.modes() != model.modes() || state.photons.cols() != model.modes()) {
    throw contract_error("state has " + std::to_string(state.modes()) + " modes, model has " +
                         std::to_string(model.modes()));
  }
  if (state.sites() != model.sites()) {
    throw contract_error("state has " + std::to_string(state.sites()) + " sites, model has " +
                         std::to_string(model.sites()));
  }
}

// Re vec(Phi_i) . vec(X) for every site at once.
Eigen::VectorXd site_traces(const OverlapTensor& overlap, const Eigen::MatrixXcd& x) {
  const Eigen::MatrixXd re = x.real();
  return overlap.flat().transpose() *
         Eigen::Map<const Eigen::VectorXd>(re.data(), re.size());
}

}  // namespace

DerivedFields derived_fields(const SystemState& state, const SystemModel& model) {
  check_dimensions(state, model);
  const int m = model.modes();
  const Eigen::VectorXd& w = model.site_weight;
  const Eigen::VectorXd& f = state.excitation;
  DerivedFields d;
  d.f_plus = model.overlap.weighted_sum(w.cwiseProduct(f));
  d.f_minus = model.overlap.weighted_sum(w.cwiseProduct((1.0 - f.array()).matrix()));
  const Eigen::MatrixXcd n_plus_one = state.photons + Eigen::MatrixXcd::Identity(m, m);
  d.stimulated_emission =
      site_traces(model.overlap, model.emission.cast<cd>().asDiagonal() * n_plus_one);
  d.stimulated_absorption =
      site_traces(model.overlap, state.photons * model.absorption.cast<cd>().asDiagonal());
  return d;
}

namespace {

Eigen::MatrixXcd photon_rhs(const SystemState& state, const SystemModel& model,
                            const DerivedFields& d) {
  const int m = model.modes();
  const Eigen::MatrixXcd& n = state.photons;
  const Eigen::VectorXcd bare =
      (cd(0.0, 1.0) * model.detuning.cast<cd>()).array() - 0.5 * model.pump.loss;
  Eigen::MatrixXcd b = bare.asDiagonal() * n;
  const Eigen::MatrixXcd gain =
      d.f_plus.cast<cd>() *
      (model.emission.cast<cd>().asDiagonal() * (n + Eigen::MatrixXcd::Identity(m, m)));
  const Eigen::MatrixXcd loss =
      d.f_minus.cast<cd>() * (model.absorption.cast<cd>().asDiagonal() * n);
  b += 0.5 * (gain - loss);
  return b + b.adjoint();
}

Eigen::VectorXd molecule_rhs(const SystemState& state, const SystemModel& model,
                             const DerivedFields& d) {
  const auto f = state.excitation.array();
  const auto down = model.pump.decay + d.stimulated_emission.array();
  const auto up = model.pump.pump.array() + d.stimulated_absorption.array();
  return (-down * f + up * (1.0 - f)).matrix();
}

}  // namespace

Eigen::MatrixXcd rhs_photon(const SystemState& state, const SystemModel& model) {
  return photon_rhs(state, model, derived_fields(state, model));
}

Eigen::VectorXd rhs_molecule(const SystemState& state, const SystemModel& model) {
  return molecule_rhs(state, model, derived_fields(state, model));
}

StatePacker::StatePacker(int modes, int sites)
    : modes_(modes), sites_(sites), size_(modes * modes + sites) {}

Eigen::VectorXd StatePacker::pack_photons(const Eigen::MatrixXcd& n) const {
  Eigen::VectorXd x(modes_ * modes_);
  const int pairs = modes_ * (modes_ - 1) / 2;
  int k = 0;
  for (int p = 0; p < modes_; ++p) x[p] = n(p, p).real();
  for (int p = 0; p < modes_; ++p) {
    for (int q = p + 1; q < modes_; ++q, ++k) {
      x[modes_ + k] = n(p, q).real();
      x[modes_ + pairs + k] = n(p, q).imag();
    }
  }
  return x;
}

Eigen::VectorXd StatePacker::pack(const SystemState& state) const {
  Eigen::VectorXd x(size_);
  x.head(modes_ * modes_) = pack_photons(state.photons);
  x.tail(sites_) = state.excitation;
  return x;
}

Eigen::VectorXd StatePacker::pack_rhs(const Eigen::MatrixXcd& dn,
                                      const Eigen::VectorXd& df) const {
  Eigen::VectorXd x(size_);
  x.head(modes_ * modes_) = pack_photons(dn);
  x.tail(sites_) = df;
  return x;
}

SystemState StatePacker::unpack(const Eigen::VectorXd& x) const {
  SystemState s;
  s.photons.resize(modes_, modes_);
  const int pairs = modes_ * (modes_ - 1) / 2;
  for (int p = 0; p < modes_; ++p) s.photons(p, p) = x[p];
  int k = 0;
  for (int p = 0; p < modes_; ++p) {
    for (int q = p + 1; q < modes_; ++q, ++k) {
      const cd v(x[modes_ + k], x[modes_ + pairs + k]);
      s.photons(p, q) = v;
      s.photons(q, p) = std::conj(v);
    }
  }
  s.excitation = x.tail(sites_);
  return s;
}

Eigen::VectorXd packed_rhs(const StatePacker& packer, const Eigen::VectorXd& x,
                           const SystemModel& model) {
  const SystemState s = packer.unpack(x);
  const DerivedFields d = derived_fields(s, model);
  return packer.pack_rhs(photon_rhs(s, model, d), molecule_rhs(s, model, d));
}

RateJacobian rate_jacobian(const SystemState& state, const SystemModel& model) {
  const int m = model.modes();
  const int n_sites = model.sites();
  const int pairs = m * (m - 1) / 2;
  const StatePacker packer(m, n_sites);
  const DerivedFields d = derived_fields(state, model);
  const Eigen::VectorXcd e = model.emission.cast<cd>();
  const Eigen::VectorXcd a = model.absorption.cast<cd>();

  RateJacobian jac;
  jac.nn.resize(m * m, m * m);
  jac.nf.resize(m * m, n_sites);
  jac.fn.resize(n_sites, m * m);

  // dn/dt is affine in n for frozen f: L(X) = C X + X C^dag.
  Eigen::MatrixXcd c = (cd(0.0, 1.0) * model.detuning.cast<cd>()).array().matrix().asDiagonal();
  c.diagonal().array() -= 0.5 * model.pump.loss;
  c += 0.5 * (d.f_plus.cast<cd>() * e.asDiagonal() - d.f_minus.cast<cd>() * a.asDiagonal());
  auto column = [&](const Eigen::MatrixXcd& x) {
    return packer.pack_photons(c * x + x * c.adjoint());
  };
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(m, m);
  for (int p = 0; p < m; ++p) {
    x(p, p) = 1.0;
    jac.nn.col(p) = column(x);
    x(p, p) = 0.0;
  }
  int k = 0;
  for (int p = 0; p < m; ++p) {
    for (int q = p + 1; q < m; ++q, ++k) {
      x(p, q) = 1.0;
      x(q, p) = 1.0;
      jac.nn.col(m + k) = column(x);
      x(p, q) = cd(0.0, 1.0);
      x(q, p) = cd(0.0, -1.0);
      jac.nn.col(m + pairs + k) = column(x);
      x(p, q) = 0.0;
      x(q, p) = 0.0;
    }
  }

  // d(dn/dt)/df_i = 1/2 W_i Phi_i K + h.c., K = E (n + I) + A n.
  const Eigen::MatrixXcd kmat =
      e.asDiagonal() * (state.photons + Eigen::MatrixXcd::Identity(m, m)) +
      a.asDiagonal() * state.photons;
  for (int i = 0; i < n_sites; ++i) {
    const Eigen::MatrixXcd b = 0.5 * model.site_weight[i] * model.overlap.site(i).cast<cd>() * kmat;
    jac.nf.col(i) = packer.pack_photons(b + b.adjoint());
  }

  // df_i/dt depends on n through Re Tr[Phi_i E n] and Re Tr[Phi_i n A].
  const auto& f = state.excitation;
  for (int i = 0; i < n_sites; ++i) {
    for (int p = 0; p < m; ++p) {
      jac.fn(i, p) = model.overlap(p, p, i) * (-f[i] * model.emission[p] +
                                               (1.0 - f[i]) * model.absorption[p]);
    }
    k = 0;
    for (int p = 0; p < m; ++p) {
      for (int q = p + 1; q < m; ++q, ++k) {
        jac.fn(i, m + k) =
            model.overlap(p, q, i) * (-f[i] * (model.emission[p] + model.emission[q]) +
                                      (1.0 - f[i]) * (model.absorption[p] + model.absorption[q]));
        jac.fn(i, m + pairs + k) = 0.0;
      }
    }
  }
  jac.ff = -(model.pump.decay + d.stimulated_emission.array() + model.pump.pump.array() +
             d.stimulated_absorption.array())
                .matrix();
  return jac;
}

Eigen::MatrixXd RateJacobian::dense() const {
  const auto np = nn.rows();
  const auto nf_cols = ff.size();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(np + nf_cols, np + nf_cols);
  j.topLeftCorner(np, np) = nn;
  j.topRightCorner(np, nf_cols) = nf;
  j.bottomLeftCorner(nf_cols, np) = fn;
  j.bottomRightCorner(nf_cols, nf_cols).diagonal() = ff;
  return j;
}

Eigen::VectorXd RateJacobian::solve_shifted(double alpha, const Eigen::VectorXd& b) const {
  const auto np = nn.rows();
  const auto ns = ff.size();
  const Eigen::ArrayXd d = alpha - ff.array();
  if ((d.abs() < 1e-300).any()) {
    Eigen::MatrixXd w = -dense();
    w.diagonal().array() += alpha;
    return w.fullPivLu().solve(b);
  }
  const Eigen::VectorXd bn = b.head(np);
  const Eigen::VectorXd bf = b.tail(ns);
  const Eigen::MatrixXd fn_scaled = (1.0 / d).matrix().asDiagonal() * fn;
  Eigen::MatrixXd schur = -nn - nf * fn_scaled;
  schur.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = bn + nf * (bf.array() / d).matrix();
  Eigen::VectorXd x(np + ns);
  x.head(np) = schur.partialPivLu().solve(rhs);
  x.tail(ns) = ((bf + fn * x.head(np)).array() / d).matrix();
  return x;
}

namespace {

struct Residuals {
  double photon = 0.0;
  double molecule = 0.0;
  double max() const { return std::max(photon, molecule); }
};

Residuals residuals_of(const SystemState& s, const SystemModel& model) {
  const DerivedFields d = derived_fields(s, model);
  Residuals r;
  r.photon = photon_rhs(s, model, d).cwiseAbs().maxCoeff();
  r.molecule = s.sites() ? molecule_rhs(s, model, d).cwiseAbs().maxCoeff() : 0.0;
  return r;
}

bool admissible(const SystemState& s) {
  for (int p = 0; p < s.modes(); ++p) {
    if (!std::isfinite(s.photons(p, p).real()) || s.photons(p, p).real() < -1e-12) return false;
  }
  for (int i = 0; i < s.sites(); ++i) {
    if (!(s.excitation[i] >= -1e-12 && s.excitation[i] <= 1.0 + 1e-12)) return false;
  }
  return true;
}

// Two-stage Rosenbrock (ROS2, gamma = 1 + 1/sqrt 2) with a first-order
// embedded estimate; integrates x from t0 to t1.
Eigen::VectorXd rosenbrock_segment(const StatePacker& packer, const SystemModel& model,
                                   Eigen::VectorXd x, double t0, double t1, double& h,
                                   const EvolveOptions& opt, std::size_t& steps) {
  const double gamma = 1.0 + 1.0 / std::sqrt(2.0);
  double t = t0;
  while (t < t1) {
    const double step = std::min({h, t1 - t, opt.max_step * 1e3});
    if (step < 1e-14 * std::max(1.0, std::abs(t))) throw ode::StepSizeUnderflow(t, step);
    const RateJacobian jac = rate_jacobian(packer.unpack(x), model);
    const double alpha = 1.0 / (gamma * step);
    const Eigen::VectorXd f0 = packed_rhs(packer, x, model);
    const Eigen::VectorXd k1 = jac.solve_shifted(alpha, alpha * f0);
    const Eigen::VectorXd f1 = packed_rhs(packer, (x + step * k1).eval(), model);
    const Eigen::VectorXd k2 = jac.solve_shifted(alpha, alpha * (f1 - 2.0 * k1));
    const Eigen::VectorXd x1 = x + 1.5 * step * k1 + 0.5 * step * k2;
    const Eigen::VectorXd err = 0.5 * step * (k1 + k2);
    const double norm = ode::detail::error_norm(err, x, x1, opt.rtol, opt.atol);
    ++steps;
    if (std::isfinite(norm) && norm <= 1.0) {
      t = (t1 - t - step) <= 0.0 ? t1 : t + step;
      x = x1;
      h = step * std::min(4.0, 0.9 / std::sqrt(std::max(norm, 1e-8)));
    } else {
      h = step * (std::isfinite(norm) ? std::max(0.1, 0.9 / std::sqrt(norm)) : 0.1);
    }
  }
  return x;
}

}  // namespace

Trajectory evolve(const SystemState& initial, const SystemModel& model,
                  const std::vector<double>& times, const EvolveOptions& options) {
  if (!(options.rtol >= 1e-12 && options.rtol <= 1e-3)) {
    throw contract_error("evolve: rtol must lie in [1e-12, 1e-3]");
  }
  check_dimensions(initial, model);
  initial.validate();
  model.validate();
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (times[k] < times[k - 1]) throw contract_error("evolve: output times must be sorted");
  }

  const StatePacker packer(model.modes(), model.sites());
  Trajectory traj;
  if (times.empty()) return traj;
  auto record = [&](double t, const Eigen::VectorXd& x) {
    SystemState s = packer.unpack(x);
    // the packed coordinates keep n exactly Hermitian; the drift is logged
    // for completeness
    traj.max_hermiticity_drift = std::max(traj.max_hermiticity_drift, s.hermiticity_defect());
    traj.time.push_back(t);
    traj.states.push_back(std::move(s));
  };

  Eigen::VectorXd x = packer.pack(initial);
  record(times.front(), x);
  ode::Options opt;
  opt.rtol = options.rtol;
  opt.atol = options.atol;
  opt.max_step = options.max_step;
  std::size_t explicit_steps = 0;
  double h_implicit = options.max_step;
  std::size_t implicit_steps = 0;
  auto rhs = [&](double, const Eigen::VectorXd& y) { return packed_rhs(packer, y, model); };

  for (std::size_t k = 1; k < times.size(); ++k) {
    const double seg[2] = {times[k - 1], times[k]};
    if (!traj.used_implicit) {
      opt.max_steps = options.explicit_step_budget > explicit_steps
                          ? options.explicit_step_budget - explicit_steps
                          : 1;
      try {
        Eigen::VectorXd next = x;
        const auto stats = ode::dopri5(
            rhs, x, std::span<const double>(seg, 2), opt,
            [&](std::size_t idx, double, const Eigen::VectorXd& y) {
              if (idx == 1) next = y;
            });
        explicit_steps += stats.accepted + stats.rejected;
        x = next;
        record(times[k], x);
        continue;
      } catch (const ode::StepBudgetExceeded&) {
        traj.used_implicit = true;
        std::ostringstream msg;
        msg << "explicit step budget exhausted near t = " << seg[0]
            << " ps; switching to the Rosenbrock scheme";
        traj.log.push_back(msg.str());
      }
    }
    x = rosenbrock_segment(packer, model, x, seg[0], seg[1], h_implicit, options,
                           implicit_steps);
    record(times[k], x);
  }
  return traj;
}

SteadyState steady_state(const SystemModel& model, const SystemState& initial,
                         const SteadyStateOptions& options) {
  if (!(options.tol > 0.0)) throw contract_error("steady_state: tol must be positive");
  model.validate();
  check_dimensions(initial, model);
  initial.validate();

  const StatePacker packer(model.modes(), model.sites());
  Eigen::VectorXd x = packer.pack(initial);
  SystemState s = initial;
  Residuals res = residuals_of(s, model);
  SteadyState out;
  out.tol = options.tol;
  out.residual_history.push_back(res.max());

  double dt = options.initial_step;
  double pseudo_time = 0.0;
  int it = 0;
  while (!(res.photon <= options.tol && res.molecule <= options.tol)) {
    if (it >= options.max_iterations || pseudo_time > options.max_time) {
      std::ostringstream msg;
      msg << "steady state not reached after " << it << " iterations (pseudo-time "
          << pseudo_time << " ps): photon residual " << res.photon << ", molecule residual "
          << res.molecule << " THz, tol " << options.tol;
      throw ConvergenceError(msg.str(), out.residual_history);
    }
    ++it;
    const Eigen::VectorXd f = packer.pack_rhs(rhs_photon(s, model), rhs_molecule(s, model));
    const RateJacobian jac = rate_jacobian(s, model);
    const Eigen::VectorXd dx = jac.solve_shifted(1.0 / dt, f);
    Eigen::VectorXd trial = x + dx;
    const int np = packer.photon_size();
    for (Eigen::Index i = np; i < trial.size(); ++i) {
      // roundoff just outside the physical box
      if (trial[i] < 0.0 && trial[i] > -1e-12) trial[i] = 0.0;
      if (trial[i] > 1.0 && trial[i] < 1.0 + 1e-12) trial[i] = 1.0;
    }
    SystemState next = packer.unpack(trial);
    if (!admissible(next)) {
      dt *= 0.25;
      out.residual_history.push_back(res.max());
      continue;
    }
    // While far from the fixed point the step is limited by how much it
    // changes the state, so the early iterations follow the physical
    // transient instead of jumping to an unphysical branch.
    double change = 0.0;
    for (int p = 0; p < model.modes(); ++p) {
      const double before = s.photons(p, p).real();
      change = std::max(change, std::abs(next.photons(p, p).real() - before) / (before + 1.0));
    }
    change = std::max(change, 5.0 * (next.excitation - s.excitation).cwiseAbs().maxCoeff());
    const Residuals next_res = residuals_of(next, model);
    if (!std::isfinite(next_res.max()) || (change > options.max_change && dt > options.min_step)) {
      dt *= 0.25;
      out.residual_history.push_back(res.max());
      continue;
    }
    pseudo_time += dt;
    // switched evolution relaxation, but an accepted step never shrinks dt:
    // the residual legitimately grows while the photon field builds up
    const double ratio = next_res.max() > 0.0 ? res.max() / next_res.max() : 4.0;
    dt *= std::clamp(ratio, 1.5, 4.0);
    x = std::move(trial);
    s = std::move(next);
    res = next_res;
    out.residual_history.push_back(res.max());
  }
  out.state = s;
  out.photon_residual = res.photon;
  out.molecule_residual = res.molecule;
  out.converged = true;
  out.iterations = it;
  out.pseudo_time = pseudo_time;
  return out;
}

}  // namespace pbec
