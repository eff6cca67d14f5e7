#include "pbec/system.hpp"

#include <cmath>

#include "pbec/errors.hpp"

namespace pbec {

void PumpProfile::validate(int sites) const {
  if (pump.size() != sites) {
    throw contract_error("pump profile has " + std::to_string(pump.size()) +
                         " sites, model has " + std::to_string(sites));
  }
  if (!(pump.array() >= 0.0).all()) throw validation_error("pump rates must be >= 0");
  if (!(decay >= 0.0)) throw validation_error("molecular decay rate must be >= 0");
  if (!(loss >= 0.0)) throw validation_error("cavity loss rate must be >= 0");
}

PumpProfile make_pump(const SpatialGrid& grid, PumpShape shape, double peak, double width,
                      double decay, double loss) {
  if (!(peak >= 0.0)) throw validation_error("pump peak must be >= 0");
  PumpProfile pump;
  pump.pump.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double value = peak;
    if (shape == PumpShape::kGaussian) {
      if (!(width > 0.0)) throw validation_error("gaussian pump needs a positive width");
      const double z = grid.positions[i] / width;
      value = peak * std::exp(-0.5 * z * z);
    }
    pump.pump[static_cast<Eigen::Index>(i)] = value;
  }
  pump.decay = decay;
  pump.loss = loss;
  pump.validate(static_cast<int>(grid.size()));
  return pump;
}

void SystemModel::validate() const {
  const int m = modes();
  if (m < 1) throw contract_error("system model has no modes");
  if (emission.size() != m || absorption.size() != m) {
    throw contract_error("rate vectors do not match the mode count");
  }
  if (overlap.modes() != m) throw contract_error("overlap tensor does not match the mode count");
  if (site_weight.size() != sites()) {
    throw contract_error("site weights do not match the site count");
  }
  if (!(site_weight.array() >= 0.0).all()) throw validation_error("site weights must be >= 0");
  pump.validate(sites());
}

SystemModel make_system(const ModeBasis& basis, const RateSet& rates,
                        const PumpProfile& pump, double molecule_density) {
  if (!(molecule_density > 0.0)) throw validation_error("molecule density must be positive");
  SystemModel model;
  model.detuning = basis.detuning;
  model.emission = rates.emission;
  model.absorption = rates.absorption;
  model.overlap = overlap_tensor(basis);
  model.site_weight = molecule_density *
                      Eigen::Map<const Eigen::VectorXd>(basis.grid.weights.data(),
                                                        basis.sites());
  model.pump = pump;
  model.validate();
  return model;
}

BuiltModel build_model(const ModelSpec& spec) {
  BuiltModel built;
  built.basis = build_harmonic_basis(spec.modes, spec.omega0, spec.spacing, spec.omega_zpl,
                                     SpatialGrid::uniform(spec.grid_points, spec.grid_extent));
  built.rates = make_rate_set(spec.profile, built.basis, spec.beta, &built.warnings);
  const PumpProfile pump = make_pump(built.basis.grid, spec.pump_shape,
                                     spec.pump_ratio * spec.decay, spec.pump_width,
                                     spec.decay, spec.loss);
  built.system = make_system(built.basis, built.rates, pump, spec.molecule_density);
  return built;
}

}  // namespace pbec
