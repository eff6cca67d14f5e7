#include "pbec/rates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pbec/errors.hpp"

namespace pbec {

Eigen::VectorXd kennard_stepanov_absorption(const Eigen::VectorXd& emission,
                                            const Eigen::VectorXd& detuning,
                                            double beta) {
  if (emission.size() != detuning.size()) {
    throw contract_error("kennard_stepanov_absorption: size mismatch");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw validation_error("inverse temperature beta must be finite and >= 0");
  }
  Eigen::VectorXd absorption(emission.size());
  for (Eigen::Index p = 0; p < emission.size(); ++p) {
    if (!(emission[p] >= 0.0) || !std::isfinite(emission[p])) {
      throw validation_error("emission rate for mode " + std::to_string(p) +
                             " must be finite and non-negative");
    }
    absorption[p] = emission[p] * std::exp(-beta * detuning[p]);
  }
  return absorption;
}

TabulatedProfile TabulatedProfile::parse(std::istream& in, const std::string& source) {
  TabulatedProfile table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double omega = 0.0;
    double rate = 0.0;
    std::string extra;
    if (!(fields >> omega >> rate) || (fields >> extra)) {
      throw format_error(source + ":" + std::to_string(line_no) +
                         ": expected two numeric columns");
    }
    if (!table.frequency.empty() && !(omega > table.frequency.back())) {
      throw format_error(source + ":" + std::to_string(line_no) +
                         ": frequencies must be strictly increasing");
    }
    if (!(rate >= 0.0)) {
      throw format_error(source + ":" + std::to_string(line_no) +
                         ": rate must be non-negative");
    }
    table.frequency.push_back(omega);
    table.rate.push_back(rate);
  }
  if (table.frequency.empty()) throw format_error(source + ": empty spectrum table");
  return table;
}

TabulatedProfile TabulatedProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open spectrum table " + path);
  return parse(in, path);
}

double TabulatedProfile::operator()(double omega, bool* clamped) const {
  if (clamped) *clamped = false;
  if (omega <= frequency.front() || frequency.size() == 1) {
    if (clamped && omega < frequency.front()) *clamped = true;
    return rate.front();
  }
  if (omega >= frequency.back()) {
    if (clamped && omega > frequency.back()) *clamped = true;
    return rate.back();
  }
  const auto hi = std::upper_bound(frequency.begin(), frequency.end(), omega);
  const auto j = static_cast<std::size_t>(hi - frequency.begin());
  const double t = (omega - frequency[j - 1]) / (frequency[j] - frequency[j - 1]);
  return (1.0 - t) * rate[j - 1] + t * rate[j];
}

double evaluate_profile(const EmissionProfile& profile, double omega, bool* clamped) {
  if (clamped) *clamped = false;
  if (const auto* flat = std::get_if<FlatProfile>(&profile)) return flat->value;
  if (const auto* g = std::get_if<GaussianProfile>(&profile)) {
    const double z = (omega - g->center) / g->width;
    return g->peak * std::exp(-0.5 * z * z);
  }
  return std::get<TabulatedProfile>(profile)(omega, clamped);
}

Eigen::VectorXd emission_profile(const EmissionProfile& profile, const ModeBasis& basis,
                                 std::vector<std::string>* warnings) {
  if (const auto* g = std::get_if<GaussianProfile>(&profile); g && !(g->width > 0.0)) {
    throw validation_error("gaussian emission profile needs a positive width");
  }
  Eigen::VectorXd emission(basis.modes());
  for (int p = 0; p < basis.modes(); ++p) {
    bool clamped = false;
    emission[p] = evaluate_profile(profile, basis.frequency[p], &clamped);
    if (clamped && warnings) {
      std::ostringstream msg;
      msg << "emission table extrapolated (clamped) for mode " << p << " at "
          << basis.frequency[p] << " THz";
      warnings->push_back(msg.str());
    }
  }
  return emission;
}

RateSet make_rate_set(const EmissionProfile& profile, const ModeBasis& basis, double beta,
                      std::vector<std::string>* warnings) {
  RateSet rates;
  rates.emission = emission_profile(profile, basis, warnings);
  rates.absorption = kennard_stepanov_absorption(rates.emission, basis.detuning, beta);
  rates.beta = beta;
  rates.omega_zpl = basis.omega_zpl;
  return rates;
}

}  // namespace pbec
