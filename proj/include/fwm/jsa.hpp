#pragma once

// Joint spectral amplitude of the degenerate-FWM pair state and its Schmidt
// decomposition.
//
//   A(w_s, w_i) = alpha(w_s + w_i) * sinc(db L / 2) * exp(i db L / 2),
//   db(w_s, w_i) = beta(w_s) + beta(w_i) - 2 beta((w_s + w_i)/2),
//
// with alpha the transform-limited Gaussian pump envelope: |alpha|^2 centered
// at 2 w_p with spectral FWHM 2*pi*0.441/t_fwhm. Filters are applied as
// wavelength-domain transmission masks; purity is Sum lambda_k^2 of the
// normalized Schmidt spectrum.

#include <complex>
#include <string>
#include <vector>

#include "fwm/fiber.hpp"

namespace fwm {

enum class FilterShape { rectangular, gaussian };

struct FilterSpec {
  double center_wavelength_m;
  double width_m;               // full width (rectangular edge-to-edge / Gaussian intensity FWHM)
  FilterShape shape = FilterShape::rectangular;

  // Full passband width mapped to angular frequency at the filter center.
  double width_omega_rad_s() const;
  // Amplitude transmission at wavelength lambda.
  double amplitude_transmission(double lambda_m) const;
};

struct JsaWindow {
  double omega_s_center_rad_s;
  double omega_s_half_span_rad_s;
  double omega_i_center_rad_s;
  double omega_i_half_span_rad_s;
  int n_s = 256;
  int n_i = 256;
};

struct JsaGrid {
  std::vector<double> omega_s;                 // axis nodes, ascending, rad/s
  std::vector<double> omega_i;
  std::vector<std::complex<double>> amplitude; // row-major: [is * omega_i.size() + ii]
  double transmitted_fraction = 1.0;           // set by apply_filters
  std::vector<std::string> warnings;

  std::complex<double>& at(std::size_t is, std::size_t ii) {
    return amplitude[is * omega_i.size() + ii];
  }
  const std::complex<double>& at(std::size_t is, std::size_t ii) const {
    return amplitude[is * omega_i.size() + ii];
  }
};

struct SchmidtSpectrum {
  std::vector<double> lambdas;  // descending, sum = 1
  double purity = 0.0;          // Sum lambda_k^2
  double schmidt_number = 0.0;  // 1 / purity
};

// Spectral FWHM (rad/s) of the pump intensity spectrum from the transform limit.
double pump_spectral_fwhm_rad_s(const PumpSpec& pump);

// Gaussian pump amplitude envelope evaluated at the pair sum frequency;
// equals 1 at w_sum = 2 w_p.
double pump_envelope(double omega_sum_rad_s, const PumpSpec& pump);

// Grid window centered on the phase-matched point, spanning +-span_filter_widths
// full filter widths on each axis.
JsaWindow default_jsa_window(const PhaseMatchSolution& pm, const FilterSpec& signal_filter,
                             const FilterSpec& idler_filter, double span_filter_widths = 4.0,
                             int n = 256);

// Builds the normalized JSA on the window (Sum |A|^2 dws dwi = 1). Records a
// warning when a known phase-matched point lies outside the window.
JsaGrid build_jsa(const PumpSpec& pump, const GasState& gas, const FiberSpec& fiber,
                  const JsaWindow& window,
                  const PhaseMatchSolution* expected_pm = nullptr);

// Multiplies the grid by the two filter transmissions and renormalizes,
// recording the transmitted probability fraction. Throws std::invalid_argument
// when the filters leave no amplitude on the grid (disjoint passband).
JsaGrid apply_filters(const JsaGrid& grid, const FilterSpec& signal_filter,
                      const FilterSpec& idler_filter);

// Schmidt spectrum via singular value decomposition: lambda_k = s_k^2 / Sum s^2.
// Throws std::invalid_argument on non-finite amplitudes. max_modes <= 0 keeps
// every mode above machine noise.
SchmidtSpectrum schmidt_decompose(const JsaGrid& grid, int max_modes = 0);

}  // namespace fwm
