#pragma once

namespace fwm {

// Physical constants (SI).
inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kBesselJ0FirstZero = 2.404825557695773;  // u01, fundamental capillary mode

// Reference state for gas refractivity tables (0 C, 1 atm).
inline constexpr double kRefTemperatureK = 273.15;
inline constexpr double kRefPressurePa = 101325.0;

// Transform-limit time-bandwidth product for Gaussian pulses (FWHM * FWHM).
inline constexpr double kGaussianTbp = 0.441;

// Gaussian pulse shape factor relating peak power to E_pulse / t_fwhm.
inline constexpr double kGaussianPeakFactor = 0.94;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace fwm
