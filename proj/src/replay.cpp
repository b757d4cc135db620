#include "fwm/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fwm {

PhaseMatchReport phase_match_report(const Config& config) {
  PhaseMatchReport report;
  PhaseMatchSearch search;
  report.solution = solve_phase_match(config.pump, config.gas, config.fiber, search);
  std::vector<double> pressures;
  for (double bar = config.sweep.pressure_bar_min; bar <= config.sweep.pressure_bar_max + 1e-9;
       bar += config.sweep.pressure_bar_step)
    pressures.push_back(bar * 1e5);
  report.sweep = pressure_sweep(pressures, config.pump, config.gas, config.fiber, search);
  return report;
}

JsaReport jsa_report(const Config& config, int grid_override) {
  const int grid = grid_override > 0 ? grid_override : config.jsa_grid;
  PhaseMatchSearch search;
  const auto pm = solve_phase_match(config.pump, config.gas, config.fiber, search);
  if (!pm)
    throw std::runtime_error("no phase matching at this pressure; joint spectrum undefined");

  JsaReport report;
  report.phase_match = *pm;
  report.grid_points = grid;

  const JsaWindow window = default_jsa_window(*pm, config.filter_signal, config.filter_idler,
                                              config.jsa_span_filter_widths, grid);
  const JsaGrid amplitude = build_jsa(config.pump, config.gas, config.fiber, window, &*pm);
  report.purity_unfiltered = schmidt_decompose(amplitude, 0).purity;

  const JsaGrid filtered = apply_filters(amplitude, config.filter_signal, config.filter_idler);
  report.transmitted_fraction = filtered.transmitted_fraction;
  report.warnings = filtered.warnings;

  SchmidtSpectrum schmidt = schmidt_decompose(filtered, 8);
  report.purity_filtered = schmidt.purity;
  report.schmidt_number_filtered = schmidt.schmidt_number;
  report.schmidt_lambdas = schmidt.lambdas;
  report.g2_unheralded_prediction = 1.0 + schmidt.purity;
  return report;
}

PowerPoint run_power_point(const Config& config, double power_mw, std::uint64_t n_pulses,
                           std::uint64_t seed, int threads) {
  PowerPoint point;
  point.power_mw = power_mw;
  point.n_pulses = n_pulses;

  RunOptions options;
  options.threads = threads;
  const RunResult run =
      simulate_run(config.source, config.detectors, power_mw, n_pulses, seed, options);
  point.duration_ps = run.duration_ps;
  point.singles_s = static_cast<double>(run.streams[0].timestamps.size());
  point.singles_i = static_cast<double>(run.streams[1].timestamps.size());

  const double duration_s = static_cast<double>(run.duration_ps) * 1e-12;
  point.dark_counts_s = config.detectors[0].dark_count_rate_hz * duration_s;
  point.dark_counts_i = config.detectors[1].dark_count_rate_hz * duration_s;

  const DelayHistogram hist =
      cross_histogram(run.streams[0].timestamps, run.streams[1].timestamps,
                      config.correlation.bin_width_ps, config.correlation.bins_per_side);
  point.decomposition = decompose(hist, config.source.pulse_period_ps,
                                  config.correlation.window_half_ps, config.correlation.side_peaks);
  point.car = car_from_decomposition(point.decomposition);
  point.g2x = g2_cross(point.decomposition.n_coinc, point.singles_s, point.singles_i,
                       point.dark_counts_s, point.dark_counts_i, n_pulses);
  point.herald = heralding_efficiency(point.decomposition.n_coinc, point.singles_s,
                                      point.dark_counts_s, config.detectors[1].quantum_efficiency);
  point.expected = analytic_expectation(config.source, config.detectors, power_mw, n_pulses,
                                        config.correlation.bin_width_ps);
  return point;
}

ThreefoldRun run_threefold(const SourceModel& model, const std::vector<DetectorSpec>& detectors,
                           double power_mw, std::uint64_t n_pulses, std::uint64_t seed,
                           std::int64_t window_half_ps, std::uint64_t block_pulses) {
  if (detectors.size() != 3)
    throw std::invalid_argument("run_threefold needs signal + two idler arms");
  BlockSource source(model, detectors, power_mw, n_pulses, seed, block_pulses);
  TripleMatcher triples(window_half_ps);
  WindowPairCounter arms(window_half_ps);

  std::vector<std::vector<std::int64_t>> block;
  std::uint64_t pulses_done = 0;
  while (source.next(block)) {
    pulses_done = std::min(pulses_done + block_pulses, n_pulses);
    const std::int64_t bound =
        static_cast<std::int64_t>(pulses_done) * model.pulse_period_ps;
    triples.feed(block[0], block[1], block[2], bound);
    arms.feed(block[1], block[2], bound);
  }
  ThreefoldRun result;
  result.triple = triples.finish();
  result.arm_pair = arms.finish();
  result.n_pulses = n_pulses;
  return result;
}

}  // namespace fwm
