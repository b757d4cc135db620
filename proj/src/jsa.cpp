#include "fwm/jsa.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "fwm/constants.hpp"

namespace fwm {

namespace {
constexpr double kTwoPiC = 2.0 * kPi * kSpeedOfLight;

double sinc(double x) {
  if (std::fabs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}
}  // namespace

double FilterSpec::width_omega_rad_s() const {
  const double lo = center_wavelength_m - 0.5 * width_m;
  const double hi = center_wavelength_m + 0.5 * width_m;
  return kTwoPiC / lo - kTwoPiC / hi;
}

double FilterSpec::amplitude_transmission(double lambda_m) const {
  const double d = lambda_m - center_wavelength_m;
  switch (shape) {
    case FilterShape::rectangular:
      return std::fabs(d) <= 0.5 * width_m ? 1.0 : 0.0;
    case FilterShape::gaussian: {
      // width_m is the intensity FWHM; amplitude = sqrt(intensity).
      const double x = d / width_m;
      return std::exp(-2.0 * std::log(2.0) * x * x);
    }
  }
  return 0.0;
}

double pump_spectral_fwhm_rad_s(const PumpSpec& pump) {
  return 2.0 * kPi * kGaussianTbp / pump.pulse_fwhm_s;
}

double pump_envelope(double omega_sum_rad_s, const PumpSpec& pump) {
  const double fwhm = pump_spectral_fwhm_rad_s(pump);
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double d = omega_sum_rad_s - 2.0 * pump.omega();
  // |alpha|^2 is the Gaussian with the stated FWHM; amplitude is its square root.
  return std::exp(-d * d / (4.0 * sigma * sigma));
}

JsaWindow default_jsa_window(const PhaseMatchSolution& pm, const FilterSpec& signal_filter,
                             const FilterSpec& idler_filter, double span_filter_widths, int n) {
  JsaWindow w;
  w.omega_s_center_rad_s = pm.omega_s_rad_s;
  w.omega_i_center_rad_s = pm.omega_i_rad_s;
  w.omega_s_half_span_rad_s = span_filter_widths * signal_filter.width_omega_rad_s();
  w.omega_i_half_span_rad_s = span_filter_widths * idler_filter.width_omega_rad_s();
  w.n_s = n;
  w.n_i = n;
  return w;
}

JsaGrid build_jsa(const PumpSpec& pump, const GasState& gas, const FiberSpec& fiber,
                  const JsaWindow& window, const PhaseMatchSolution* expected_pm) {
  if (window.n_s < 2 || window.n_i < 2) {
    throw std::invalid_argument("build_jsa: grid needs at least 2x2 nodes");
  }
  JsaGrid grid;
  grid.omega_s.resize(window.n_s);
  grid.omega_i.resize(window.n_i);
  for (int k = 0; k < window.n_s; ++k) {
    grid.omega_s[k] = window.omega_s_center_rad_s +
                      window.omega_s_half_span_rad_s *
                          (2.0 * k / (window.n_s - 1) - 1.0);
  }
  for (int k = 0; k < window.n_i; ++k) {
    grid.omega_i[k] = window.omega_i_center_rad_s +
                      window.omega_i_half_span_rad_s *
                          (2.0 * k / (window.n_i - 1) - 1.0);
  }

  if (expected_pm != nullptr) {
    const bool inside = expected_pm->omega_s_rad_s >= grid.omega_s.front() &&
                        expected_pm->omega_s_rad_s <= grid.omega_s.back() &&
                        expected_pm->omega_i_rad_s >= grid.omega_i.front() &&
                        expected_pm->omega_i_rad_s <= grid.omega_i.back();
    if (!inside) {
      grid.warnings.push_back("window excludes the phase-matched point");
    }
  }

  // beta on the axes; the pump-average term beta((w_s+w_i)/2) is per cell.
  std::vector<double> beta_s(grid.omega_s.size()), beta_i(grid.omega_i.size());
  for (std::size_t k = 0; k < grid.omega_s.size(); ++k) {
    beta_s[k] = propagation_constant(grid.omega_s[k], gas, fiber);
  }
  for (std::size_t k = 0; k < grid.omega_i.size(); ++k) {
    beta_i[k] = propagation_constant(grid.omega_i[k], gas, fiber);
  }

  const double half_l = 0.5 * fiber.length_m;
  grid.amplitude.resize(grid.omega_s.size() * grid.omega_i.size());
  double norm2 = 0.0;
  for (std::size_t is = 0; is < grid.omega_s.size(); ++is) {
    for (std::size_t ii = 0; ii < grid.omega_i.size(); ++ii) {
      const double w_sum = grid.omega_s[is] + grid.omega_i[ii];
      const double db = beta_s[is] + beta_i[ii] -
                        2.0 * propagation_constant(0.5 * w_sum, gas, fiber);
      const double mag = pump_envelope(w_sum, pump) * sinc(db * half_l);
      const std::complex<double> phase(std::cos(db * half_l), std::sin(db * half_l));
      const std::complex<double> a = mag * phase;
      grid.at(is, ii) = a;
      norm2 += std::norm(a);
    }
  }

  const double ds = grid.omega_s[1] - grid.omega_s[0];
  const double di = grid.omega_i[1] - grid.omega_i[0];
  const double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2 * ds * di) : 0.0;
  for (auto& a : grid.amplitude) a *= scale;
  return grid;
}

JsaGrid apply_filters(const JsaGrid& grid, const FilterSpec& signal_filter,
                      const FilterSpec& idler_filter) {
  JsaGrid out = grid;
  std::vector<double> ts(grid.omega_s.size()), ti(grid.omega_i.size());
  for (std::size_t k = 0; k < grid.omega_s.size(); ++k) {
    ts[k] = signal_filter.amplitude_transmission(kTwoPiC / grid.omega_s[k]);
  }
  for (std::size_t k = 0; k < grid.omega_i.size(); ++k) {
    ti[k] = idler_filter.amplitude_transmission(kTwoPiC / grid.omega_i[k]);
  }
  double before = 0.0, after = 0.0;
  for (std::size_t is = 0; is < grid.omega_s.size(); ++is) {
    for (std::size_t ii = 0; ii < grid.omega_i.size(); ++ii) {
      const std::complex<double> a = grid.at(is, ii);
      before += std::norm(a);
      const std::complex<double> f = a * (ts[is] * ti[ii]);
      out.at(is, ii) = f;
      after += std::norm(f);
    }
  }
  if (!(after > 0.0)) {
    throw std::invalid_argument("apply_filters: filters leave no amplitude on the grid");
  }
  out.transmitted_fraction = before > 0.0 ? after / before : 0.0;
  const double scale = 1.0 / std::sqrt(after / before);
  for (auto& a : out.amplitude) a *= scale;
  return out;
}

SchmidtSpectrum schmidt_decompose(const JsaGrid& grid, int max_modes) {
  const std::size_t ns = grid.omega_s.size();
  const std::size_t ni = grid.omega_i.size();
  Eigen::MatrixXcd m(ns, ni);
  for (std::size_t is = 0; is < ns; ++is) {
    for (std::size_t ii = 0; ii < ni; ++ii) {
      const std::complex<double> a = grid.at(is, ii);
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
        throw std::invalid_argument("schmidt_decompose: non-finite amplitude");
      }
      m(static_cast<Eigen::Index>(is), static_cast<Eigen::Index>(ii)) = a;
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  double total = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) total += s[k] * s[k];
  if (!(total > 0.0)) {
    throw std::invalid_argument("schmidt_decompose: zero amplitude grid");
  }
  SchmidtSpectrum spec;
  const Eigen::Index keep =
      max_modes > 0 ? std::min<Eigen::Index>(max_modes, s.size()) : s.size();
  spec.lambdas.reserve(static_cast<std::size_t>(keep));
  for (Eigen::Index k = 0; k < keep; ++k) {
    const double lam = s[k] * s[k] / total;
    if (lam <= 0.0) break;
    spec.lambdas.push_back(lam);
  }
  double purity = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    const double lam = s[k] * s[k] / total;
    purity += lam * lam;
  }
  spec.purity = purity;
  spec.schmidt_number = 1.0 / purity;
  return spec;
}

}  // namespace fwm
