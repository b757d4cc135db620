#include "fwm/fiber.hpp"

#include <cmath>
#include <string>

#include "fwm/constants.hpp"

namespace fwm {

double GasState::density_ratio() const {
  return (pressure_pa / refractivity.reference_pressure_pa) *
         (refractivity.reference_temperature_k / temperature_k);
}

double PumpSpec::omega() const { return 2.0 * kPi * kSpeedOfLight / wavelength_m; }

double PumpSpec::peak_power_w() const {
  return kGaussianPeakFactor * average_power_w / (rep_rate_hz * pulse_fwhm_s);
}

double gas_refractive_index(double omega_rad_s, const GasState& gas) {
  const RefractivityModel& model = gas.refractivity;
  const double lambda_m = 2.0 * kPi * kSpeedOfLight / omega_rad_s;
  if (!(lambda_m >= model.valid_lambda_min_m && lambda_m <= model.valid_lambda_max_m)) {
    throw std::domain_error(
        "gas_refractive_index: wavelength " + std::to_string(lambda_m * 1e9) +
        " nm outside the refractivity validity band [" +
        std::to_string(model.valid_lambda_min_m * 1e9) + ", " +
        std::to_string(model.valid_lambda_max_m * 1e9) + "] nm");
  }
  const double sigma2 = 1e-12 / (lambda_m * lambda_m);  // (1/lambda[um])^2
  double delta_ref = 0.0;
  for (const SellmeierTerm& t : model.terms) delta_ref += t.b / (t.c_um2 - sigma2);
  return 1.0 + delta_ref * gas.density_ratio();
}

double effective_index(double omega_rad_s, double n_gas, const FiberSpec& fiber) {
  const double ratio =
      fiber.mode_constant_u01 * kSpeedOfLight / (fiber.core_radius_m * omega_rad_s * n_gas);
  const double arg = 1.0 - ratio * ratio;
  if (arg <= 0.0) {
    throw std::domain_error("effective_index: unguided frequency (u01*c/(R*w*n) >= 1)");
  }
  return n_gas * std::sqrt(arg);
}

double propagation_constant(double omega_rad_s, const GasState& gas, const FiberSpec& fiber) {
  const double n_gas = gas_refractive_index(omega_rad_s, gas);
  return effective_index(omega_rad_s, n_gas, fiber) * omega_rad_s / kSpeedOfLight;
}

double phase_mismatch(double omega_s_rad_s, double omega_i_rad_s, const PumpSpec& pump,
                      const GasState& gas, const FiberSpec& fiber,
                      bool include_nonlinear_shift) {
  const double omega_p = pump.omega();
  if (std::fabs(omega_s_rad_s + omega_i_rad_s - 2.0 * omega_p) > 1e-9 * 2.0 * omega_p) {
    throw std::invalid_argument(
        "phase_mismatch: w_s + w_i != 2 w_p beyond 1e-9 relative (energy conservation)");
  }
  double db = propagation_constant(omega_s_rad_s, gas, fiber) +
              propagation_constant(omega_i_rad_s, gas, fiber) -
              2.0 * propagation_constant(omega_p, gas, fiber);
  if (include_nonlinear_shift) db += 2.0 * fiber.gamma_w_inv_m_inv * pump.peak_power_w();
  return db;
}

namespace {

// delta_beta as a function of detuning; energy conservation holds by construction.
double mismatch_at_detuning(double detuning, double omega_p, const PumpSpec& pump,
                            const GasState& gas, const FiberSpec& fiber, bool nonlinear) {
  double db = propagation_constant(omega_p + detuning, gas, fiber) +
              propagation_constant(omega_p - detuning, gas, fiber) -
              2.0 * propagation_constant(omega_p, gas, fiber);
  if (nonlinear) db += 2.0 * fiber.gamma_w_inv_m_inv * pump.peak_power_w();
  return db;
}

}  // namespace

std::optional<PhaseMatchSolution> solve_phase_match(const PumpSpec& pump, const GasState& gas,
                                                    const FiberSpec& fiber,
                                                    const PhaseMatchSearch& search) {
  const double omega_p = pump.omega();
  double omega_max = search.omega_max_rad_s;
  if (omega_max <= 0.0) {
    // Keep signal and idler strictly inside the refractivity validity band.
    const double band_lo = 2.0 * kPi * kSpeedOfLight / gas.refractivity.valid_lambda_max_m;
    const double band_hi = 2.0 * kPi * kSpeedOfLight / gas.refractivity.valid_lambda_min_m;
    omega_max = std::min(omega_p - band_lo, band_hi - omega_p) * (1.0 - 1e-12);
  }
  if (!(omega_max > search.omega_min_rad_s) || search.scan_points < 2) return std::nullopt;

  const double step = (omega_max - search.omega_min_rad_s) / (search.scan_points - 1);
  double prev_x = search.omega_min_rad_s;
  double prev_f = mismatch_at_detuning(prev_x, omega_p, pump, gas, fiber,
                                       search.include_nonlinear_shift);
  double lo = 0.0, hi = 0.0, f_lo = 0.0;
  bool bracketed = false;
  for (int k = 1; k < search.scan_points; ++k) {
    const double x = search.omega_min_rad_s + step * k;
    const double f = mismatch_at_detuning(x, omega_p, pump, gas, fiber,
                                          search.include_nonlinear_shift);
    if (prev_f == 0.0 || prev_f * f < 0.0) {
      lo = prev_x;
      hi = x;
      f_lo = prev_f;
      bracketed = true;
      break;
    }
    prev_x = x;
    prev_f = f;
  }
  if (!bracketed) return std::nullopt;

  for (int it = 0; it < 200 && hi - lo > 1e-3; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = mismatch_at_detuning(mid, omega_p, pump, gas, fiber,
                                           search.include_nonlinear_shift);
    if ((f_lo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }

  PhaseMatchSolution sol;
  sol.detuning_rad_s = 0.5 * (lo + hi);
  sol.omega_s_rad_s = omega_p + sol.detuning_rad_s;
  sol.omega_i_rad_s = omega_p - sol.detuning_rad_s;
  sol.lambda_s_m = 2.0 * kPi * kSpeedOfLight / sol.omega_s_rad_s;
  sol.lambda_i_m = 2.0 * kPi * kSpeedOfLight / sol.omega_i_rad_s;
  sol.residual_mismatch_per_m = std::fabs(mismatch_at_detuning(
      sol.detuning_rad_s, omega_p, pump, gas, fiber, search.include_nonlinear_shift));
  if (sol.residual_mismatch_per_m > search.residual_tolerance_per_m) return std::nullopt;
  return sol;
}

std::vector<PressureSweepRow> pressure_sweep(const std::vector<double>& pressures_pa,
                                             const PumpSpec& pump, const GasState& gas_template,
                                             const FiberSpec& fiber,
                                             const PhaseMatchSearch& search) {
  for (std::size_t k = 1; k < pressures_pa.size(); ++k) {
    if (pressures_pa[k] < pressures_pa[k - 1]) {
      throw std::invalid_argument("pressure_sweep: pressures must be sorted ascending");
    }
  }
  std::vector<PressureSweepRow> rows;
  rows.reserve(pressures_pa.size());
  for (double p : pressures_pa) {
    GasState gas = gas_template;
    gas.pressure_pa = p;
    rows.push_back({p, solve_phase_match(pump, gas, fiber, search)});
  }
  return rows;
}

}  // namespace fwm
