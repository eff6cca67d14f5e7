#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pbec/modes.hpp"

namespace pbec {

// Per-mode absorption and emission rates tied together by the
// Kennard-Stepanov relation A_p = E_p exp(-beta delta_p).
struct RateSet {
  Eigen::VectorXd absorption;  // THz
  Eigen::VectorXd emission;    // THz
  double beta = 0.0;           // ps
  double omega_zpl = 0.0;      // THz
};

// A_p = E_p exp(-beta delta_p), elementwise. Emission rates must be finite and
// non-negative; beta must be non-negative.
Eigen::VectorXd kennard_stepanov_absorption(const Eigen::VectorXd& emission,
                                            const Eigen::VectorXd& detuning,
                                            double beta);

struct FlatProfile {
  double value = 0.0;
  bool operator==(const FlatProfile&) const = default;
};

// peak * exp(-(omega - center)^2 / (2 width^2))
struct GaussianProfile {
  double peak = 1.0;
  double center = 0.0;
  double width = 1.0;
  bool operator==(const GaussianProfile&) const = default;
};

// Piecewise-linear emission spectrum read from a two-column text table.
struct TabulatedProfile {
  std::vector<double> frequency;
  std::vector<double> rate;

  // Format: whitespace separated `frequency_THz rate_THz` per line, lines
  // starting with '#' and blank lines ignored. Frequencies must be strictly
  // increasing.
  static TabulatedProfile parse(std::istream& in, const std::string& source = "<stream>");
  static TabulatedProfile load(const std::string& path);

  // Linear interpolation, clamped to the endpoint values outside the table.
  double operator()(double omega, bool* clamped = nullptr) const;
  bool operator==(const TabulatedProfile&) const = default;
};

using EmissionProfile = std::variant<FlatProfile, GaussianProfile, TabulatedProfile>;

double evaluate_profile(const EmissionProfile& profile, double omega,
                        bool* clamped = nullptr);

// E_p evaluated at each mode frequency. Extrapolation of a tabulated profile
// appends one warning per clamped mode to `warnings` when given.
Eigen::VectorXd emission_profile(const EmissionProfile& profile, const ModeBasis& basis,
                                 std::vector<std::string>* warnings = nullptr);

RateSet make_rate_set(const EmissionProfile& profile, const ModeBasis& basis, double beta,
                      std::vector<std::string>* warnings = nullptr);

}  // namespace pbec
