#pragma once

// Unit conventions used throughout:
//   frequencies and rates: angular THz (rad/ps)
//   time: ps
//   length: oscillator length l_0 of the cavity modes

namespace pbec::units {

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K
inline constexpr double kRoomTemperature = 300.0;     // K

// hbar / (k_B T) expressed in ps, i.e. the inverse temperature conjugate to
// angular frequencies in rad/ps.
inline double beta_from_temperature(double kelvin) {
  return kHbar / (kBoltzmann * kelvin) * 1e12;
}

}  // namespace pbec::units
