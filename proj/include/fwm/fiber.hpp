#pragma once

// Gas-filled hollow-core capillary dispersion and degenerate four-wave-mixing
// phase matching.
//
// The fundamental-mode effective index follows the capillary (Marcatili) model,
//   n_eff(w) = n_gas(w) * sqrt(1 - (u01 * c / (R * w * n_gas(w)))^2),
// and the gas refractivity scales linearly with number density from a
// config-supplied reference curve,
//   n_gas - 1 = (p / p_ref) * (T_ref / T) * sum_j B_j / (C_j - sigma^2),
// with sigma = 1/lambda in 1/um. The refractivity coefficients are data, not
// code: they ship in the scenario config.

#include <optional>
#include <stdexcept>
#include <vector>

namespace fwm {

// One term of the gas refractivity curve at reference density:
// contributes B / (C - sigma^2) to n - 1, sigma in 1/um.
struct SellmeierTerm {
  double b;        // dimensionless strength
  double c_um2;    // resonance position as sigma^2, um^-2
};

struct RefractivityModel {
  std::vector<SellmeierTerm> terms;
  double reference_temperature_k = 273.15;
  double reference_pressure_pa = 101325.0;
  double valid_lambda_min_m = 0.25e-6;  // curve validity band
  double valid_lambda_max_m = 2.2e-6;
};

struct GasState {
  double pressure_pa = 4.0e5;
  double temperature_k = 293.0;
  RefractivityModel refractivity;
  // Ideal-gas number density relative to the refractivity reference state.
  double density_ratio() const;
};

struct FiberSpec {
  double core_radius_m = 22e-6;
  double length_m = 1.0;
  double mode_constant_u01 = 2.404825557695773;  // first zero of J0
  double gamma_w_inv_m_inv = 0.0;     // nonlinear coefficient, 1/(W m)
  double loss_db_per_m = 0.0;         // informational; detector path_transmission lumps losses
};

struct PumpSpec {
  double wavelength_m = 1033e-9;
  double pulse_fwhm_s = 230e-15;
  double rep_rate_hz = 2.0e6;
  double average_power_w = 30e-3;

  double omega() const;               // angular frequency, rad/s
  double pulse_period_s() const { return 1.0 / rep_rate_hz; }
  // Peak power of a Gaussian pulse: 0.94 * E_pulse / t_fwhm.
  double peak_power_w() const;
};

struct PhaseMatchSolution {
  double detuning_rad_s;              // Omega > 0 with w_s = w_p + Omega, w_i = w_p - Omega
  double omega_s_rad_s;
  double omega_i_rad_s;
  double lambda_s_m;
  double lambda_i_m;
  double residual_mismatch_per_m;     // |delta_beta| at the returned root
};

// n_gas at angular frequency w; throws std::domain_error outside the validity band.
double gas_refractive_index(double omega_rad_s, const GasState& gas);

// Capillary fundamental-mode effective index; throws std::domain_error when the
// frequency is unguided (sqrt argument <= 0). Always < n_gas for finite radius.
double effective_index(double omega_rad_s, double n_gas, const FiberSpec& fiber);

// beta(w) = n_eff(w) * w / c.
double propagation_constant(double omega_rad_s, const GasState& gas, const FiberSpec& fiber);

// delta_beta = beta(w_s) + beta(w_i) - 2 beta(w_p) [+ 2 gamma P_peak].
// Preconditions: w_s + w_i must equal 2 w_p to 1e-9 relative (energy
// conservation); violations throw std::invalid_argument.
double phase_mismatch(double omega_s_rad_s, double omega_i_rad_s, const PumpSpec& pump,
                      const GasState& gas, const FiberSpec& fiber,
                      bool include_nonlinear_shift = false);

struct PhaseMatchSearch {
  double omega_min_rad_s = 2.0 * 3.141592653589793 * 10.0e12;  // skip near-degenerate region
  double omega_max_rad_s = 0.0;      // 0 = derive from the refractivity validity band
  int scan_points = 4096;
  bool include_nonlinear_shift = false;
  double residual_tolerance_per_m = 1e-4;
};

// Scans delta_beta(Omega) over [omega_min, omega_max] for a sign change and
// bisects it. Returns std::nullopt when no bracketing interval exists
// ("no phase matching at this pressure", expected below the tuning range).
std::optional<PhaseMatchSolution> solve_phase_match(const PumpSpec& pump, const GasState& gas,
                                                    const FiberSpec& fiber,
                                                    const PhaseMatchSearch& search = {});

struct PressureSweepRow {
  double pressure_pa;
  std::optional<PhaseMatchSolution> solution;
};

// One row per pressure, in input order. Pressures must be sorted ascending.
std::vector<PressureSweepRow> pressure_sweep(const std::vector<double>& pressures_pa,
                                             const PumpSpec& pump, const GasState& gas_template,
                                             const FiberSpec& fiber,
                                             const PhaseMatchSearch& search = {});

}  // namespace fwm
