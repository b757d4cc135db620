#include "fwm/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fwm {
namespace {

struct WlsSolution {
  Eigen::VectorXd coeff;
  Eigen::MatrixXd covariance;
};

// One weighted least-squares solve restricted to the active terms.
WlsSolution solve_wls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& weights, const std::vector<int>& active_cols) {
  const Eigen::Index n = design.rows();
  const Eigen::Index m = static_cast<Eigen::Index>(active_cols.size());
  Eigen::MatrixXd a(n, m);
  for (Eigen::Index j = 0; j < m; ++j) a.col(j) = design.col(active_cols[j]);
  Eigen::VectorXd sw = weights.array().sqrt();
  Eigen::MatrixXd aw = sw.asDiagonal() * a;
  Eigen::VectorXd yw = sw.asDiagonal() * y;
  WlsSolution sol;
  sol.coeff = aw.colPivHouseholderQr().solve(yw);
  Eigen::MatrixXd gram = aw.transpose() * aw;
  sol.covariance = gram.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  return sol;
}

PowerLawFit fit_with_weights(std::span<const double> powers, std::span<const double> counts,
                             std::vector<int> orders, Eigen::VectorXd weights, int reweight_iters) {
  const Eigen::Index n = static_cast<Eigen::Index>(powers.size());
  const Eigen::Index m = static_cast<Eigen::Index>(orders.size());
  Eigen::MatrixXd design(n, m);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = counts[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j)
      design(i, j) = std::pow(powers[static_cast<std::size_t>(i)], orders[static_cast<std::size_t>(j)]);
  }

  PowerLawFit fit;
  fit.orders = std::move(orders);
  fit.coefficients.assign(static_cast<std::size_t>(m), 0.0);
  fit.sigma.assign(static_cast<std::size_t>(m), 0.0);
  fit.active.assign(static_cast<std::size_t>(m), 1);

  WlsSolution sol;
  std::vector<int> active;
  for (int iter = 0; iter <= reweight_iters; ++iter) {
    // Non-negative solve: drop the most negative term until none remain.
    active.clear();
    for (int j = 0; j < m; ++j) active.push_back(j);
    while (true) {
      sol = solve_wls(design, y, weights, active);
      Eigen::Index worst = -1;
      double worst_val = -1e-12 * (1.0 + sol.coeff.cwiseAbs().maxCoeff());
      for (Eigen::Index j = 0; j < sol.coeff.size(); ++j)
        if (sol.coeff(j) < worst_val) {
          worst_val = sol.coeff(j);
          worst = j;
        }
      if (worst < 0 || active.size() <= 1) break;
      active.erase(active.begin() + worst);
    }
    if (iter == reweight_iters) break;
    // Re-estimate Poisson weights from the current model.
    for (Eigen::Index i = 0; i < n; ++i) {
      double model = 0.0;
      for (std::size_t j = 0; j < active.size(); ++j)
        model += sol.coeff(static_cast<Eigen::Index>(j)) * design(i, active[j]);
      weights(i) = 1.0 / std::max(model, 1.0);
    }
  }

  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto col = static_cast<std::size_t>(active[j]);
    fit.coefficients[col] = std::max(0.0, sol.coeff(static_cast<Eigen::Index>(j)));
    fit.sigma[col] = std::sqrt(std::max(0.0, sol.covariance(static_cast<Eigen::Index>(j),
                                                            static_cast<Eigen::Index>(j))));
  }
  for (Eigen::Index j = 0; j < m; ++j)
    fit.active[static_cast<std::size_t>(j)] =
        std::find(active.begin(), active.end(), static_cast<int>(j)) != active.end();

  fit.chi2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double model = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
      model += fit.coefficients[static_cast<std::size_t>(j)] * design(i, j);
    const double r = y(i) - model;
    fit.chi2 += weights(i) * r * r;
  }
  fit.dof = static_cast<int>(n) - static_cast<int>(active.size());
  return fit;
}

Eigen::VectorXd initial_weights(std::span<const double> counts) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(counts.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = 1.0 / std::max(counts[static_cast<std::size_t>(i)], 1.0);
  return w;
}

void validate_fit_inputs(std::span<const double> powers, std::span<const double> counts,
                         const std::vector<int>& orders) {
  if (powers.size() != counts.size()) throw std::invalid_argument("powers/counts size mismatch");
  if (orders.empty()) throw std::invalid_argument("no fit orders given");
  if (powers.size() < orders.size())
    throw std::invalid_argument("need at least as many points as fit terms");
  for (double p : powers)
    if (!(p > 0.0)) throw std::invalid_argument("powers must be positive");
}

}  // namespace

double PowerLawFit::evaluate(double power) const {
  double v = 0.0;
  for (std::size_t j = 0; j < orders.size(); ++j)
    v += coefficients[j] * std::pow(power, orders[j]);
  return v;
}

PowerLawFit fit_power_law(std::span<const double> powers, std::span<const double> counts,
                          std::vector<int> orders) {
  validate_fit_inputs(powers, counts, orders);
  return fit_with_weights(powers, counts, std::move(orders), initial_weights(counts), 3);
}

double term_significance_z(std::span<const double> powers, std::span<const double> counts,
                           const std::vector<int>& orders, int test_order) {
  validate_fit_inputs(powers, counts, orders);
  std::vector<int> reduced;
  for (int o : orders)
    if (o != test_order) reduced.push_back(o);
  if (reduced.size() == orders.size())
    throw std::invalid_argument("test_order is not among the fit orders");
  if (reduced.empty()) throw std::invalid_argument("cannot drop the only fit term");

  const PowerLawFit full = fit_power_law(powers, counts, orders);
  // Shared weights from the richer model make the chi2 difference a nested
  // comparison.
  Eigen::VectorXd weights(static_cast<Eigen::Index>(powers.size()));
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    weights(i) = 1.0 / std::max(full.evaluate(powers[static_cast<std::size_t>(i)]), 1.0);
  const PowerLawFit full_w = fit_with_weights(powers, counts, orders, weights, 0);
  const PowerLawFit reduced_w = fit_with_weights(powers, counts, reduced, weights, 0);
  return std::sqrt(std::max(0.0, reduced_w.chi2 - full_w.chi2));
}

LineFit fit_log_slope(std::span<const double> x, std::span<const double> y,
                      std::span<const double> y_sigma) {
  if (x.size() != y.size() || x.size() != y_sigma.size())
    throw std::invalid_argument("x/y/sigma size mismatch");
  if (x.size() < 3) throw std::invalid_argument("need at least 3 points for a slope error");
  double sw = 0.0;
  double swx = 0.0;
  double swy = 0.0;
  double swxx = 0.0;
  double swxy = 0.0;
  std::vector<double> lx(x.size());
  std::vector<double> ly(y.size());
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(y_sigma[i] > 0.0))
      throw std::invalid_argument("log fit needs positive x, y and sigma");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    const double s_ly = y_sigma[i] / y[i];
    w[i] = 1.0 / (s_ly * s_ly);
    sw += w[i];
    swx += w[i] * lx[i];
    swy += w[i] * ly[i];
    swxx += w[i] * lx[i] * lx[i];
    swxy += w[i] * lx[i] * ly[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(det > 0.0)) throw std::invalid_argument("degenerate abscissa in log fit");
  LineFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  fit.slope_sigma = std::sqrt(sw / det);
  fit.intercept_sigma = std::sqrt(swxx / det);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    fit.chi2 += w[i] * r * r;
  }
  fit.dof = static_cast<int>(x.size()) - 2;
  return fit;
}

CarResult car_from_decomposition(const HistogramDecomposition& d) {
  CarResult r;
  r.n_coinc = d.n_coinc;
  r.n_acc = d.n_acc;
  r.n_acc_raw = d.n_acc_raw;

  const double baseline_sum = d.n_unco_per_bin * static_cast<double>(d.baseline_bins);
  const double var_baseline =
      d.baseline_bins > 0
          ? baseline_sum / (static_cast<double>(d.baseline_bins) * static_cast<double>(d.baseline_bins))
          : 0.0;
  const double var_coinc = d.zero_peak_raw +
                           static_cast<double>(d.zero_window_bins) *
                               static_cast<double>(d.zero_window_bins) * var_baseline;

  double side_raw_sum = 0.0;
  double side_bins_sum = 0.0;
  for (const PeakSummary& p : d.side_peaks) {
    side_raw_sum += p.raw;
    side_bins_sum += static_cast<double>(p.window_bins);
  }
  const double n_peaks = static_cast<double>(d.side_peaks.size());
  const double var_acc = side_raw_sum / (n_peaks * n_peaks) +
                         (side_bins_sum / n_peaks) * (side_bins_sum / n_peaks) * var_baseline;
  const double var_acc_raw = side_raw_sum / (n_peaks * n_peaks);

  r.valid = d.n_acc > 0.0;
  if (r.valid) {
    r.car = d.n_coinc / d.n_acc;
    r.sigma = std::abs(r.car) * std::sqrt(var_coinc / (d.n_coinc * d.n_coinc) +
                                          var_acc / (d.n_acc * d.n_acc));
  } else {
    r.car = std::numeric_limits<double>::infinity();
    r.sigma = std::numeric_limits<double>::quiet_NaN();
  }
  if (d.n_acc_raw > 0.0) {
    r.car_raw = d.n_coinc / d.n_acc_raw;
    r.sigma_raw = std::abs(r.car_raw) * std::sqrt(var_coinc / (d.n_coinc * d.n_coinc) +
                                                  var_acc_raw / (d.n_acc_raw * d.n_acc_raw));
  } else {
    r.car_raw = std::numeric_limits<double>::infinity();
    r.sigma_raw = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

Ratio g2_cross(double n_coinc, double n_s, double n_i, double dark_counts_s, double dark_counts_i,
               std::uint64_t n_pulses) {
  Ratio r;
  const double s = n_s - dark_counts_s;
  const double i = n_i - dark_counts_i;
  if (!(s > 0.0) || !(i > 0.0) || !(n_coinc > 0.0) || n_pulses == 0) return r;
  r.value = n_coinc * static_cast<double>(n_pulses) / (s * i);
  r.sigma = r.value * std::sqrt(1.0 / n_coinc + 1.0 / s + 1.0 / i);
  r.valid = true;
  return r;
}

double infer_eta(std::span<const double> powers_mw, std::span<const double> g2_values) {
  if (powers_mw.size() != g2_values.size() || powers_mw.empty())
    throw std::invalid_argument("powers/g2 size mismatch");
  // mu = 1/g2 = eta * P^2; through-origin least squares of 1/g2 against P^2.
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < powers_mw.size(); ++k) {
    if (!(g2_values[k] > 0.0)) throw std::invalid_argument("g2 values must be positive");
    const double x = powers_mw[k] * powers_mw[k];
    num += x / g2_values[k];
    den += x * x;
  }
  return num / den;
}

Ratio g2_heralded(const TripleCounts& c) {
  Ratio r;
  if (c.n_s == 0 || c.n_si1 == 0 || c.n_si2 == 0) return r;
  const double ns = static_cast<double>(c.n_s);
  const double n1 = static_cast<double>(c.n_si1);
  const double n2 = static_cast<double>(c.n_si2);
  const double nt = static_cast<double>(c.n_triple);
  r.value = nt * ns / (n1 * n2);
  const double nt_floor = std::max(nt, 1.0);
  r.sigma = (nt_floor * ns / (n1 * n2)) *
            std::sqrt(1.0 / nt_floor + 1.0 / n1 + 1.0 / n2 + 1.0 / ns);
  r.valid = true;
  return r;
}

Ratio g2_unheralded(const PairCounts& c, std::uint64_t n_pulses) {
  Ratio r;
  if (c.n_a == 0 || c.n_b == 0 || c.n_matched == 0 || n_pulses == 0) return r;
  const double na = static_cast<double>(c.n_a);
  const double nb = static_cast<double>(c.n_b);
  const double nm = static_cast<double>(c.n_matched);
  r.value = nm * static_cast<double>(n_pulses) / (na * nb);
  r.sigma = r.value * std::sqrt(1.0 / nm + 1.0 / na + 1.0 / nb);
  r.valid = true;
  return r;
}

HeraldEfficiency heralding_efficiency(double n_coinc, double n_s, double dark_counts_s,
                                      double idler_detector_efficiency) {
  HeraldEfficiency h;
  const double heralds = n_s - dark_counts_s;
  if (!(heralds > 0.0) || !(n_coinc > 0.0) || !(idler_detector_efficiency > 0.0)) return h;
  h.raw = n_coinc / heralds;
  h.sigma_raw = h.raw * std::sqrt(1.0 / n_coinc + 1.0 / heralds);
  h.corrected = h.raw / idler_detector_efficiency;
  h.sigma_corrected = h.sigma_raw / idler_detector_efficiency;
  h.valid = true;
  return h;
}

AnalyticExpectation analytic_expectation(const SourceModel& model,
                                         const std::vector<DetectorSpec>& detectors,
                                         double power_mw, std::uint64_t n_pulses,
                                         std::int64_t bin_width_ps) {
  if (detectors.size() < 2) throw std::invalid_argument("need signal and idler detectors");
  if (bin_width_ps <= 0) throw std::invalid_argument("bin_width_ps must be > 0");
  double lam_sum = 0.0;
  double lam2_sum = 0.0;
  for (double lam : model.schmidt_lambdas) {
    lam_sum += lam;
    lam2_sum += lam * lam;
  }
  if (!(lam_sum > 0.0)) throw std::invalid_argument("schmidt_lambdas sum to zero");

  AnalyticExpectation e;
  e.mu = pair_mean(model, power_mw);
  e.purity = lam2_sum / (lam_sum * lam_sum);
  e.raman_s_per_pulse = model.raman_signal_per_mw * power_mw;
  e.raman_i_per_pulse = model.raman_idler_per_mw * power_mw;

  const double ts = detectors[0].total_efficiency();
  const double ti = detectors[1].total_efficiency();
  const double pulses = static_cast<double>(n_pulses);
  const double period_s = static_cast<double>(model.pulse_period_ps) * 1e-12;
  const double duration_s = pulses * period_s;
  const double dark_s = detectors[0].dark_count_rate_hz * duration_s;
  const double dark_i = detectors[1].dark_count_rate_hz * duration_s;

  e.singles_s = pulses * ts * (e.mu + e.raman_s_per_pulse) + dark_s;
  e.singles_i = pulses * ti * (e.mu + e.raman_i_per_pulse) + dark_i;

  // Same-pulse detected pairs: E[(n + r_s)(n + r_i)] with n thermal multimode
  // (E[n^2] = mu + mu^2 (1 + purity)) and independent Poisson Raman terms.
  const double same_pulse =
      e.mu + e.mu * e.mu * (1.0 + e.purity) + e.mu * (e.raman_s_per_pulse + e.raman_i_per_pulse) +
      e.raman_s_per_pulse * e.raman_i_per_pulse;
  e.n_coinc = pulses * ts * ti * same_pulse;
  e.n_acc = pulses * ts * ti * (e.mu + e.raman_s_per_pulse) * (e.mu + e.raman_i_per_pulse);

  // Uncorrelated floor from dark counts paired with anything: product of the
  // two singles rates minus the dark-dark double counting correction.
  const double rate_s = e.singles_s / duration_s;
  const double rate_i = e.singles_i / duration_s;
  const double rate_dark_s = detectors[0].dark_count_rate_hz;
  const double rate_dark_i = detectors[1].dark_count_rate_hz;
  const double bin_s = static_cast<double>(bin_width_ps) * 1e-12;
  e.n_unco_per_bin =
      (rate_s * rate_dark_i + rate_dark_s * rate_i - rate_dark_s * rate_dark_i) * bin_s *
      duration_s;

  e.car = e.n_acc > 0.0 ? e.n_coinc / e.n_acc : std::numeric_limits<double>::infinity();
  const double s_corr = e.singles_s - dark_s;
  const double i_corr = e.singles_i - dark_i;
  e.g2_cross = (s_corr > 0.0 && i_corr > 0.0)
                   ? e.n_coinc * pulses / (s_corr * i_corr)
                   : std::numeric_limits<double>::infinity();

  // Idler-band autocorrelations; splitter arm efficiencies cancel exactly.
  const double mu = e.mu;
  const double rho = e.raman_i_per_pulse;
  const double band = mu + rho;
  e.g2_unheralded =
      band > 0.0
          ? (mu * mu * (1.0 + e.purity) + 2.0 * mu * rho + rho * rho) / (band * band)
          : 0.0;
  e.g2_heralded_ideal =
      mu > 0.0 ? ((1.0 + e.purity) * mu + 2.0 * rho + rho * rho) / ((1.0 + rho) * (1.0 + rho))
               : 0.0;

  // First-order decomposition of the histogram by photon class. Peak terms
  // are window counts per peak over the run; uncorrelated terms are per bin.
  const double unco_scale = bin_s * duration_s / (period_s * period_s);
  const double ds_rate = rate_dark_s * period_s;  // dark counts per pulse period
  const double di_rate = rate_dark_i * period_s;
  e.terms = {
      {"pair", 2, "coincidence", pulses * ts * ti * e.mu},
      {"param-param", 4, "accidentals", pulses * ts * ti * e.mu * e.mu},
      {"param-raman", 3, "accidentals",
       pulses * ts * ti * (e.mu * e.raman_i_per_pulse + e.raman_s_per_pulse * e.mu)},
      {"raman-raman", 2, "accidentals",
       pulses * ts * ti * e.raman_s_per_pulse * e.raman_i_per_pulse},
      {"param-dark", 2, "uncorrelated",
       unco_scale * (ts * e.mu * di_rate + ds_rate * ti * e.mu)},
      {"raman-dark", 1, "uncorrelated",
       unco_scale * (ts * e.raman_s_per_pulse * di_rate + ds_rate * ti * e.raman_i_per_pulse)},
      {"dark-dark", 0, "uncorrelated", unco_scale * ds_rate * di_rate},
  };
  return e;
}

}  // namespace fwm
