#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <utility>

#include <Eigen/Dense>

#include "pbec/errors.hpp"

namespace pbec::ode {

struct Options {
  double rtol = 1e-8;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 picks a step from the first derivative
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_calls = 0;
};

class StepSizeUnderflow : public Error {
 public:
  StepSizeUnderflow(double t, double h)
      : Error(ErrorKind::kConvergence, describe(t, h)), time_(t), step_(h) {}
  double time() const { return time_; }
  double step() const { return step_; }

 private:
  static std::string describe(double t, double h) {
    std::ostringstream msg;
    msg << "integrator step size underflow at t = " << t << " ps (h = " << h
        << "); the system is too stiff for the explicit scheme";
    return msg.str();
  }
  double time_;
  double step_;
};

class StepBudgetExceeded : public Error {
 public:
  StepBudgetExceeded(double t, std::size_t steps)
      : Error(ErrorKind::kConvergence,
              "integrator step budget exhausted at t = " + std::to_string(t) + " ps after " +
                  std::to_string(steps) + " steps"),
        time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

namespace detail {

template <class Vector>
double error_norm(const Vector& err, const Vector& y0, const Vector& y1, double rtol,
                  double atol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return worst;
}

}  // namespace detail

// Dormand-Prince 5(4) with error control in the scaled max-norm. `times` must
// be non-decreasing; `observe(k, t, y)` is called once per requested time
// (including times[0], the initial condition). Steps never straddle an output
// time. `project(y)` is applied after every accepted step.
template <class Vector, class Rhs, class Observer, class Project>
Stats dopri5(Rhs&& rhs, Vector y, std::span<const double> times, const Options& opt,
             Observer&& observe, Project&& project) {
  Stats stats;
  if (times.empty()) return stats;
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                   b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double t = times[0];
  observe(std::size_t{0}, t, std::as_const(y));
  Vector k1 = rhs(t, y);
  ++stats.rhs_calls;

  double h = opt.initial_step;
  if (!(h > 0.0)) {
    const double d0 = std::max(1e-300, y.cwiseAbs().maxCoeff());
    const double d1 = std::max(1e-300, k1.cwiseAbs().maxCoeff());
    h = std::max(1e-6, 0.01 * d0 / d1);
    if (y.cwiseAbs().maxCoeff() == 0.0) h = 1e-6;
  }
  h = std::min(h, opt.max_step);

  for (std::size_t k = 1; k < times.size(); ++k) {
    const double target = times[k];
    while (t < target) {
      if (stats.accepted + stats.rejected >= opt.max_steps) {
        throw StepBudgetExceeded(t, stats.accepted + stats.rejected);
      }
      bool last = false;
      double step = std::min(h, opt.max_step);
      if (t + step >= target || (target - t - step) < 1e-12 * std::abs(target)) {
        step = target - t;
        last = true;
      }
      if (step < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
        throw StepSizeUnderflow(t, step);
      }
      const Vector k2 = rhs(t + c2 * step, (y + step * (a21 * k1)).eval());
      const Vector k3 = rhs(t + c3 * step, (y + step * (a31 * k1 + a32 * k2)).eval());
      const Vector k4 =
          rhs(t + c4 * step, (y + step * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
      const Vector k5 = rhs(t + c5 * step,
                            (y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
      const Vector k6 = rhs(
          t + step, (y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
      Vector y1 = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vector k7 = rhs(t + step, y1);
      stats.rhs_calls += 6;
      const Vector err =
          step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double norm = detail::error_norm(err, y, y1, opt.rtol, opt.atol);
      if (!std::isfinite(norm)) {
        ++stats.rejected;
        h = 0.1 * step;
        continue;
      }
      if (norm <= 1.0) {
        ++stats.accepted;
        t = last ? target : t + step;
        project(y1);
        y = std::move(y1);
        k1 = last ? rhs(t, y) : k7;
        if (last) ++stats.rhs_calls;
        const double grow = norm == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(norm, -0.2));
        // a step clipped to hit an output time does not shrink the proposal
        h = last ? std::max(h, step * grow) : step * grow;
      } else {
        ++stats.rejected;
        h = step * std::max(0.1, 0.9 * std::pow(norm, -0.2));
      }
    }
    observe(k, t, std::as_const(y));
  }
  return stats;
}

template <class Vector, class Rhs, class Observer>
Stats dopri5(Rhs&& rhs, Vector y, std::span<const double> times, const Options& opt,
             Observer&& observe) {
  return dopri5(std::forward<Rhs>(rhs), std::move(y), times, opt,
                std::forward<Observer>(observe), [](Vector&) {});
}

}  // namespace pbec::ode
