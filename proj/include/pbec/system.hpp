#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbec/modes.hpp"
#include "pbec/rates.hpp"
#include "pbec/units.hpp"

namespace pbec {

// Incoherent pumping and loss channels. All rates in THz.
struct PumpProfile {
  Eigen::VectorXd pump;  // Gamma_up^i per site
  double decay = 0.0;    // Gamma_down, molecular decay to non-cavity modes
  double loss = 0.0;     // kappa, cavity loss

  void validate(int sites) const;
};

enum class PumpShape { kGaussian, kUniform };

// Gamma_up(r) = peak * exp(-r^2 / (2 width^2)) for the gaussian shape.
PumpProfile make_pump(const SpatialGrid& grid, PumpShape shape, double peak, double width,
                      double decay, double loss);

// Everything the rate equations and the correlation generator need: per-mode
// detunings and rates, the overlap tensor at the molecule sites, the number of
// molecules each site represents, and the pump.
struct SystemModel {
  Eigen::VectorXd detuning;
  Eigen::VectorXd emission;
  Eigen::VectorXd absorption;
  OverlapTensor overlap;
  Eigen::VectorXd site_weight;
  PumpProfile pump;

  int modes() const { return static_cast<int>(detuning.size()); }
  int sites() const { return overlap.sites(); }

  // Throws a contract error on any dimension mismatch.
  void validate() const;
};

// Site weights are molecule_density * w_i, so site sums approximate
// density-weighted integrals over the cavity plane.
SystemModel make_system(const ModeBasis& basis, const RateSet& rates,
                        const PumpProfile& pump, double molecule_density);

// Declarative description of a cavity configuration, rebuilt for every point
// of a parameter sweep.
struct ModelSpec {
  int modes = 10;
  double omega0 = 520.0;
  double spacing = 1.7;
  double omega_zpl = 620.0;
  int grid_points = 401;
  double grid_extent = 8.0;
  double molecule_density = 1e8;  // molecules per unit site weight

  // per-molecule emission spectrum, Stokes shifted below the zero-phonon line
  EmissionProfile profile = GaussianProfile{2.5e-6, 500.0, 15.0};
  double beta = units::beta_from_temperature(units::kRoomTemperature);

  PumpShape pump_shape = PumpShape::kGaussian;
  double pump_width = 3.0;
  double pump_ratio = 0.2;  // peak Gamma_up / Gamma_down
  double decay = 3e-5;
  double loss = 0.2;

  bool operator==(const ModelSpec&) const = default;
};

struct BuiltModel {
  ModeBasis basis;
  RateSet rates;
  SystemModel system;
  std::vector<std::string> warnings;
};

BuiltModel build_model(const ModelSpec& spec);

}  // namespace pbec
