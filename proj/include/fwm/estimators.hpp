#pragma once

// Statistical estimators for pulsed pair-source runs: power-law fits of count
// rates, coincidence-to-accidental ratio, the second-order correlation family
// (cross, heralded, unheralded), heralding efficiency, and closed-form
// expected rates for cross-checking simulations.

#include <cstdint>
#include <span>
#include <vector>

#include "fwm/correlator.hpp"
#include "fwm/source.hpp"

namespace fwm {

// Weighted least-squares fit of counts(P) = sum_j c_j * P^orders[j] with
// Poisson-motivated weights (variance taken as the modeled count, floored at
// one; weights are re-estimated over a few iterations). Coefficients are
// constrained to be non-negative: negative terms are clamped to zero and
// removed from the active set.
struct PowerLawFit {
  std::vector<int> orders;
  std::vector<double> coefficients;  // per order, >= 0
  std::vector<double> sigma;         // 1-sigma; 0 for clamped terms
  std::vector<char> active;          // 0 if the term was clamped to zero
  double chi2 = 0.0;
  int dof = 0;

  double evaluate(double power) const;
};

PowerLawFit fit_power_law(std::span<const double> powers, std::span<const double> counts,
                          std::vector<int> orders);

// Likelihood-ratio-style significance of one term: z such that adding the
// term improves the weighted chi-square by z^2. Both fits share the weights
// of the richer model so the difference is a proper nested comparison.
double term_significance_z(std::span<const double> powers, std::span<const double> counts,
                           const std::vector<int>& orders, int test_order);

// Straight-line fit of ln(y) against ln(x), weighted by the relative errors
// sigma_y / y; the slope is the power-law exponent of y(x).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_sigma = 0.0;
  double intercept_sigma = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};

LineFit fit_log_slope(std::span<const double> x, std::span<const double> y,
                      std::span<const double> y_sigma);

struct CarResult {
  double car = 0.0;      // n_coinc / n_acc (baseline-subtracted accidentals)
  double sigma = 0.0;
  double car_raw = 0.0;  // n_coinc / raw side-peak mean; immune to the
                         // baseline subtraction driving n_acc below zero
  double sigma_raw = 0.0;
  bool valid = false;    // false when n_acc <= 0 (car is then +inf)
  double n_coinc = 0.0;
  double n_acc = 0.0;
  double n_acc_raw = 0.0;
};

CarResult car_from_decomposition(const HistogramDecomposition& d);

struct Ratio {
  double value = 0.0;
  double sigma = 0.0;
  bool valid = false;
};

// Cross-correlation g2 between signal and idler from the coincidence excess:
// g2 = n_coinc * n_pulses / (n_s_corr * n_i_corr), with singles corrected for
// the expected dark-count contribution. For a pure pair source this is 1/mu.
Ratio g2_cross(double n_coinc, double n_s, double n_i, double dark_counts_s, double dark_counts_i,
               std::uint64_t n_pulses);

// Pair generation probability per pulse back-solved from g2_cross
// measurements: mu = 1/g2 = eta * P^2, fitted through the origin vs P^2.
double infer_eta(std::span<const double> powers_mw, std::span<const double> g2_values);

// Heralded autocorrelation from threefold counts:
// g2 = n_triple * n_s / (n_si1 * n_si2). Invalid until both twofold counts
// are nonzero; with zero triples the value is 0 and sigma reflects one count.
Ratio g2_heralded(const TripleCounts& counts);

// Unheralded (thermal) autocorrelation between the two idler arms at zero
// delay: g2 = n_matched * n_pulses / (n_a * n_b). Expected 1 + sum(lambda^2)
// for a multimode thermal field.
Ratio g2_unheralded(const PairCounts& counts, std::uint64_t n_pulses);

struct HeraldEfficiency {
  double raw = 0.0;        // n_coinc / dark-corrected heralds: whole idler path
  double corrected = 0.0;  // raw / idler detector efficiency: path before detector
  double sigma_raw = 0.0;
  double sigma_corrected = 0.0;
  bool valid = false;
};

HeraldEfficiency heralding_efficiency(double n_coinc, double n_s, double dark_counts_s,
                                      double idler_detector_efficiency);

// One first-order contribution to the delay histogram: which photon classes
// pair up, the pump-power exponent of the rate, and where the counts land.
// Peak-located terms ("coincidence", "accidentals") are window counts over the
// run (per peak); "uncorrelated" terms are counts per histogram bin.
struct RateTerm {
  const char* name = "";       // e.g. "pair", "param-param", "raman-dark"
  int power = 0;               // exponent of the pump power dependence
  const char* location = "";   // "coincidence" | "accidentals" | "uncorrelated"
  double counts = 0.0;         // expected contribution over the run
};

// Closed-form expected counts for a two-detector run; the simulation must
// agree with these within counting statistics.
struct AnalyticExpectation {
  double mu = 0.0;               // pairs per pulse
  double purity = 0.0;           // sum of squared normalized Schmidt weights
  double raman_s_per_pulse = 0.0;
  double raman_i_per_pulse = 0.0;
  double singles_s = 0.0;        // expected counts over the run, darks included
  double singles_i = 0.0;
  double n_coinc = 0.0;          // expected zero-peak excess
  double n_acc = 0.0;            // expected side-peak excess
  double n_unco_per_bin = 0.0;   // expected off-peak bin level
  double car = 0.0;
  double g2_cross = 0.0;
  // Arm autocorrelations of the idler band. g2_unheralded assumes all-pairs
  // window counting between two splitter arms; g2_heralded_ideal assumes a
  // lossless herald path with greedy matching and no signal-band Raman, the
  // configuration in which the small-mu law g2 = (1 + purity) * mu holds.
  double g2_unheralded = 0.0;
  double g2_heralded_ideal = 0.0;
  std::vector<RateTerm> terms;   // first-order decomposition by photon class
};

AnalyticExpectation analytic_expectation(const SourceModel& model,
                                         const std::vector<DetectorSpec>& detectors,
                                         double power_mw, std::uint64_t n_pulses,
                                         std::int64_t bin_width_ps);

}  // namespace fwm
