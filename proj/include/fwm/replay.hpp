#pragma once

// End-to-end scenario runners shared by the command-line tool and the
// acceptance checks: dispersion/phase-matching reports, joint-spectrum
// reports, simulated power points with full correlation analysis, and
// three-detector runs for the autocorrelation measurements.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fwm/config.hpp"
#include "fwm/correlator.hpp"
#include "fwm/estimators.hpp"
#include "fwm/fiber.hpp"
#include "fwm/jsa.hpp"
#include "fwm/source.hpp"

namespace fwm {

struct PhaseMatchReport {
  std::optional<PhaseMatchSolution> solution;  // at the configured pressure
  std::vector<PressureSweepRow> sweep;
};

PhaseMatchReport phase_match_report(const Config& config);

struct JsaReport {
  PhaseMatchSolution phase_match;
  double purity_filtered = 0.0;
  double schmidt_number_filtered = 0.0;
  double purity_unfiltered = 0.0;
  double transmitted_fraction = 0.0;
  double g2_unheralded_prediction = 0.0;  // 1 + purity
  std::vector<double> schmidt_lambdas;    // filtered, descending
  std::vector<std::string> warnings;
  int grid_points = 0;
};

// grid_override = 0 uses the configured grid size.
JsaReport jsa_report(const Config& config, int grid_override = 0);

// One simulated power point, correlated and reduced to the standard
// estimators, with the closed-form expectation alongside.
struct PowerPoint {
  double power_mw = 0.0;
  std::uint64_t n_pulses = 0;
  std::int64_t duration_ps = 0;
  double singles_s = 0.0;
  double singles_i = 0.0;
  double dark_counts_s = 0.0;  // expected dark contribution to the singles
  double dark_counts_i = 0.0;
  HistogramDecomposition decomposition;
  CarResult car;
  Ratio g2x;
  HeraldEfficiency herald;
  AnalyticExpectation expected;
};

PowerPoint run_power_point(const Config& config, double power_mw, std::uint64_t n_pulses,
                           std::uint64_t seed, int threads);

// Three-detector run (signal + two idler arms), streamed so pulse counts can
// be very large. Triples use greedy chronological matching (one partner per
// herald); the arm-arm count uses all-pairs window counting, whose expectation
// is the true second-order moment needed by the unheralded g2.
struct ThreefoldRun {
  TripleCounts triple;
  PairCounts arm_pair;  // all arm-1 x arm-2 pairs in window
  std::uint64_t n_pulses = 0;
};

ThreefoldRun run_threefold(const SourceModel& model, const std::vector<DetectorSpec>& detectors,
                           double power_mw, std::uint64_t n_pulses, std::uint64_t seed,
                           std::int64_t window_half_ps, std::uint64_t block_pulses = 1u << 22);

}  // namespace fwm
