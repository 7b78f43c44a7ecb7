#pragma once

#include <numbers>

namespace eitmem {

/// Physical constants (CODATA 2018, SI).
namespace constants {
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double epsilon0 = 8.8541878128e-12;   // F/m
inline constexpr double boltzmann = 1.380649e-23;      // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

/// Frequency in ordinary Hz (cycles per second).
struct Hertz {
  double value = 0.0;
  friend constexpr bool operator==(Hertz, Hertz) = default;
};

/// Frequency in angular units (rad/s).
struct AngularFrequency {
  double value = 0.0;
  friend constexpr bool operator==(AngularFrequency, AngularFrequency) = default;
};

constexpr AngularFrequency to_angular(Hertz f) {
  return {constants::two_pi * f.value};
}
constexpr Hertz to_hertz(AngularFrequency w) {
  return {w.value / constants::two_pi};
}

/// Shorthand for the common "2π × value in Hz" literal.
constexpr double angular_from_hz(double hz) { return constants::two_pi * hz; }
constexpr double hz_from_angular(double rad_s) {
  return rad_s / constants::two_pi;
}

}  // namespace eitmem
