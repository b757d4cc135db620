// fwmlab: command-line front end for the pair-source toolbox.
//
// Subcommands cover the full workflow: dispersion/phase-matching reports,
// joint-spectrum purity, Monte-Carlo tag generation, tag correlation, the
// estimator battery, and a one-shot replay of the reference experiment.
// All outputs are deterministic in (config, seed): file contents never
// depend on wall clock or thread count.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fwm/config.hpp"
#include "fwm/constants.hpp"
#include "fwm/replay.hpp"
#include "fwm/tag_io.hpp"

namespace {

using namespace fwm;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "JSON config file (omit for built-in defaults)");
  sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  sub->add_option("--seed", opts.seed, "RNG seed")->capture_default_str();
  sub->add_option("--threads", opts.threads, "worker threads (or FWMLAB_THREADS)");
  sub->add_flag("--quiet", opts.quiet, "suppress progress output");
}

int env_threads() {
  const char* env = std::getenv("FWMLAB_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v > 0 ? v : 1;
}

std::ofstream open_csv(const std::filesystem::path& path, const std::string& tool,
                       const std::vector<std::string>& preamble) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "# fwmlab " << tool << "\n";
  for (const std::string& line : preamble) os << "# " << line << "\n";
  return os;
}

void say(const CommonOpts& opts, const std::string& line) {
  if (!opts.quiet) std::cout << line << "\n";
}

// ---- phase-match ---------------------------------------------------------

void cmd_phase_match(const CommonOpts& opts) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  PhaseMatchSearch search;
  const auto pm = solve_phase_match(config.pump, config.gas, config.fiber, search);

  auto os = open_csv(std::filesystem::path(opts.out_dir) / "phase_match.csv", "phase-match",
                     {"config_hash " + config_hash(config)});
  os << "pressure_bar,temperature_k,matched,detuning_thz,signal_nm,idler_nm,residual_per_m\n";
  os << g17(config.gas.pressure_pa / 1e5) << ',' << g17(config.gas.temperature_k) << ',';
  if (pm) {
    os << 1 << ',' << g17(pm->detuning_rad_s / (2.0 * kPi) / 1e12) << ','
       << g17(pm->lambda_s_m * 1e9) << ',' << g17(pm->lambda_i_m * 1e9) << ','
       << g17(pm->residual_mismatch_per_m) << "\n";
    say(opts, "phase match at " + g17(config.gas.pressure_pa / 1e5) + " bar: detuning " +
                  g17(pm->detuning_rad_s / (2.0 * kPi) / 1e12) + " THz, signal " +
                  g17(pm->lambda_s_m * 1e9) + " nm, idler " + g17(pm->lambda_i_m * 1e9) + " nm");
  } else {
    os << 0 << ",nan,nan,nan,nan\n";
    say(opts, "no phase matching at this pressure");
  }
}

// ---- sweep ---------------------------------------------------------------

void cmd_sweep(const CommonOpts& opts) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const PhaseMatchReport report = phase_match_report(config);

  auto os = open_csv(std::filesystem::path(opts.out_dir) / "pressure_sweep.csv", "sweep",
                     {"config_hash " + config_hash(config)});
  os << "pressure_bar,matched,detuning_thz,signal_nm,idler_nm,residual_per_m\n";
  int n_matched = 0;
  double idler_min = 0.0;
  double idler_max = 0.0;
  for (const PressureSweepRow& row : report.sweep) {
    os << g17(row.pressure_pa / 1e5) << ',';
    if (row.solution) {
      const PhaseMatchSolution& s = *row.solution;
      os << 1 << ',' << g17(s.detuning_rad_s / (2.0 * kPi) / 1e12) << ','
         << g17(s.lambda_s_m * 1e9) << ',' << g17(s.lambda_i_m * 1e9) << ','
         << g17(s.residual_mismatch_per_m) << "\n";
      const double idler_nm = s.lambda_i_m * 1e9;
      if (n_matched == 0 || idler_nm < idler_min) idler_min = idler_nm;
      if (n_matched == 0 || idler_nm > idler_max) idler_max = idler_nm;
      ++n_matched;
    } else {
      os << "0,nan,nan,nan,nan\n";
    }
  }
  say(opts, "sweep: " + std::to_string(n_matched) + " of " + std::to_string(report.sweep.size()) +
                " pressures phase-matched" +
                (n_matched ? ", idler " + g17(idler_min) + ".." + g17(idler_max) + " nm" : ""));
}

// ---- jsa -----------------------------------------------------------------

void cmd_jsa(const CommonOpts& opts, int grid_override) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const JsaReport report = jsa_report(config, grid_override);

  std::vector<std::string> preamble = {
      "config_hash " + config_hash(config),
      "grid_points " + std::to_string(report.grid_points),
      "purity_filtered " + g17(report.purity_filtered),
      "schmidt_number_filtered " + g17(report.schmidt_number_filtered),
      "purity_unfiltered " + g17(report.purity_unfiltered),
      "transmitted_fraction " + g17(report.transmitted_fraction),
      "g2_unheralded_prediction " + g17(report.g2_unheralded_prediction),
  };
  for (const std::string& w : report.warnings) preamble.push_back("warning " + w);
  auto os = open_csv(std::filesystem::path(opts.out_dir) / "jsa_schmidt.csv", "jsa", preamble);
  os << "mode,lambda\n";
  for (std::size_t k = 0; k < report.schmidt_lambdas.size(); ++k)
    os << k << ',' << g17(report.schmidt_lambdas[k]) << "\n";
  say(opts, "joint spectrum: filtered purity " + g17(report.purity_filtered) + " (grid " +
                std::to_string(report.grid_points) + "), unfiltered " +
                g17(report.purity_unfiltered) + ", transmitted fraction " +
                g17(report.transmitted_fraction));
}

// ---- simulate --------------------------------------------------------------

std::vector<DetectorSpec> detectors_for(const Config& config, bool three_channel) {
  if (!three_channel) return config.detectors;
  // 50/50 fiber splitter on the idler path: both arms keep the idler detector
  // characteristics; the routing itself halves each arm's rate.
  return {config.detectors[0], config.detectors[1], config.detectors[1]};
}

void cmd_simulate(const CommonOpts& opts, double power_mw, std::uint64_t n_pulses,
                  bool three_channel) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const double power = power_mw > 0.0 ? power_mw : config.pump.average_power_w * 1e3;

  RunOptions run_opts;
  run_opts.threads = opts.threads;
  const RunResult run = simulate_run(config.source, detectors_for(config, three_channel), power,
                                     n_pulses, opts.seed, run_opts);

  const std::filesystem::path dir(opts.out_dir);
  RunSidecar sidecar;
  sidecar.seed = opts.seed;
  sidecar.config_hash = config_hash(config);
  sidecar.n_pulses = run.n_pulses;
  sidecar.duration_ps = run.duration_ps;
  sidecar.pulse_period_ps = config.source.pulse_period_ps;
  sidecar.power_mw = power;
  const std::vector<std::string> names =
      three_channel ? std::vector<std::string>{"tags_signal.ptag", "tags_idler1.ptag",
                                               "tags_idler2.ptag"}
                    : std::vector<std::string>{"tags_signal.ptag", "tags_idler.ptag"};
  for (std::size_t c = 0; c < run.streams.size(); ++c) {
    write_tag_file((dir / names[c]).string(), run.streams[c]);
    sidecar.tag_files.push_back(names[c]);
  }
  write_sidecar((dir / "run.json").string(), sidecar);

  std::string counts;
  for (std::size_t c = 0; c < run.streams.size(); ++c)
    counts += (c ? " / " : "") + std::to_string(run.streams[c].timestamps.size());
  say(opts, "simulated " + std::to_string(n_pulses) + " pulses at " + g17(power) +
                " mW; tags " + counts);
}

// ---- correlate -------------------------------------------------------------

struct LoadedRun {
  RunSidecar sidecar;
  std::vector<TagStream> streams;
};

LoadedRun load_run(const std::string& run_dir) {
  const std::filesystem::path dir(run_dir);
  LoadedRun run;
  run.sidecar = read_sidecar((dir / "run.json").string());
  if (run.sidecar.tag_files.size() < 2)
    throw std::runtime_error("run sidecar lists fewer than two tag files");
  for (const std::string& name : run.sidecar.tag_files)
    run.streams.push_back(read_tag_file((dir / name).string()));
  return run;
}

void cmd_correlate(const CommonOpts& opts, const std::string& run_dir) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const LoadedRun run = load_run(run_dir);
  if (run.sidecar.config_hash != config_hash(config))
    std::cerr << "warning: config hash differs from the one recorded with the run\n";

  const std::int64_t period = run.sidecar.pulse_period_ps > 0 ? run.sidecar.pulse_period_ps
                                                              : config.source.pulse_period_ps;
  const DelayHistogram hist =
      cross_histogram(run.streams[0].timestamps, run.streams[1].timestamps,
                      config.correlation.bin_width_ps, config.correlation.bins_per_side);
  const HistogramDecomposition d =
      decompose(hist, period, config.correlation.window_half_ps, config.correlation.side_peaks);

  const std::filesystem::path dir(opts.out_dir);
  const std::vector<std::string> preamble = {"config_hash " + config_hash(config),
                                             "seed " + std::to_string(run.sidecar.seed),
                                             "power_mw " + g17(run.sidecar.power_mw)};
  {
    auto os = open_csv(dir / "histogram.csv", "correlate", preamble);
    os << "bin_center_ps,count\n";
    for (std::int64_t b = -hist.bins_per_side; b < hist.bins_per_side; ++b)
      os << g17(hist.bin_center_ps(b)) << ',' << hist.count_at(b) << "\n";
  }
  {
    auto os = open_csv(dir / "coincidences.csv", "correlate", preamble);
    os << "n_coinc,n_acc,n_acc_raw,n_unco_per_bin,zero_peak_raw,zero_window_bins,baseline_bins\n";
    os << g17(d.n_coinc) << ',' << g17(d.n_acc) << ',' << g17(d.n_acc_raw) << ','
       << g17(d.n_unco_per_bin) << ',' << g17(d.zero_peak_raw) << ',' << d.zero_window_bins << ','
       << d.baseline_bins << "\n";
  }
  say(opts, "coincidences " + g17(d.n_coinc) + ", accidentals " + g17(d.n_acc) + " (raw " +
                g17(d.n_acc_raw) + "), baseline " + g17(d.n_unco_per_bin) + " per bin");
}

// ---- analyze ---------------------------------------------------------------

void cmd_analyze(const CommonOpts& opts, const std::string& run_dir) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const LoadedRun run = load_run(run_dir);
  if (run.sidecar.config_hash != config_hash(config))
    std::cerr << "warning: config hash differs from the one recorded with the run\n";

  const std::int64_t period = run.sidecar.pulse_period_ps > 0 ? run.sidecar.pulse_period_ps
                                                              : config.source.pulse_period_ps;
  const double duration_s = static_cast<double>(run.sidecar.duration_ps) * 1e-12;
  const double n_s = static_cast<double>(run.streams[0].timestamps.size());

  const bool three_channel = run.streams.size() >= 3;
  std::vector<std::int64_t> idler_merged;
  if (three_channel) {
    // Undo the splitter for the two-detector estimators.
    idler_merged.resize(run.streams[1].timestamps.size() + run.streams[2].timestamps.size());
    std::merge(run.streams[1].timestamps.begin(), run.streams[1].timestamps.end(),
               run.streams[2].timestamps.begin(), run.streams[2].timestamps.end(),
               idler_merged.begin());
  }
  const std::vector<std::int64_t>& idler =
      three_channel ? idler_merged : run.streams[1].timestamps;
  const double n_i = static_cast<double>(idler.size());

  const double dark_s = config.detectors[0].dark_count_rate_hz * duration_s;
  const double dark_i = config.detectors[1].dark_count_rate_hz * duration_s *
                        (three_channel ? 2.0 : 1.0);

  const DelayHistogram hist =
      cross_histogram(run.streams[0].timestamps, idler, config.correlation.bin_width_ps,
                      config.correlation.bins_per_side);
  const HistogramDecomposition d =
      decompose(hist, period, config.correlation.window_half_ps, config.correlation.side_peaks);
  const CarResult car = car_from_decomposition(d);
  const Ratio g2x = g2_cross(d.n_coinc, n_s, n_i, dark_s, dark_i, run.sidecar.n_pulses);
  const HeraldEfficiency herald =
      heralding_efficiency(d.n_coinc, n_s, dark_s, config.detectors[1].quantum_efficiency);

  Ratio g2h;
  Ratio g2nh;
  if (three_channel) {
    const TripleCounts t =
        threefold(run.streams[0].timestamps, run.streams[1].timestamps,
                  run.streams[2].timestamps, config.correlation.window_half_ps);
    g2h = g2_heralded(t);
    const PairCounts arms =
        count_window_pairs(run.streams[1].timestamps, run.streams[2].timestamps,
                           config.correlation.window_half_ps);
    g2nh = g2_unheralded(arms, run.sidecar.n_pulses);
  }
  const double purity_from_g2 =
      g2nh.valid ? std::clamp(g2nh.value - 1.0, 0.0, 1.0)
                 : std::numeric_limits<double>::quiet_NaN();

  auto os = open_csv(std::filesystem::path(opts.out_dir) / "metrics.csv", "analyze",
                     {"config_hash " + config_hash(config),
                      "seed " + std::to_string(run.sidecar.seed)});
  os << "power_mw,n_pulses,singles_s,singles_i,n_coinc,n_acc,n_acc_raw,n_unco_per_bin,"
        "car,car_err,car_raw,car_raw_err,g2_cross,g2_cross_err,"
        "g2_heralded,g2_heralded_err,g2_unheralded,g2_unheralded_err,purity_from_g2,"
        "herald_raw,herald_raw_err,herald_corrected,herald_corrected_err\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  os << g17(run.sidecar.power_mw) << ',' << run.sidecar.n_pulses << ',' << g17(n_s) << ','
     << g17(n_i) << ',' << g17(d.n_coinc) << ',' << g17(d.n_acc) << ',' << g17(d.n_acc_raw) << ','
     << g17(d.n_unco_per_bin) << ',' << g17(car.car) << ',' << g17(car.sigma) << ','
     << g17(car.car_raw) << ',' << g17(car.sigma_raw) << ','
     << g17(g2x.valid ? g2x.value : nan) << ',' << g17(g2x.valid ? g2x.sigma : nan) << ','
     << g17(g2h.valid ? g2h.value : nan) << ',' << g17(g2h.valid ? g2h.sigma : nan) << ','
     << g17(g2nh.valid ? g2nh.value : nan) << ',' << g17(g2nh.valid ? g2nh.sigma : nan) << ','
     << g17(purity_from_g2) << ','
     << g17(herald.valid ? herald.raw : nan) << ',' << g17(herald.valid ? herald.sigma_raw : nan)
     << ',' << g17(herald.valid ? herald.corrected : nan) << ','
     << g17(herald.valid ? herald.sigma_corrected : nan) << "\n";

  say(opts, "CAR " + g17(car.car) + " +- " + g17(car.sigma) + ", g2_cross " +
                (g2x.valid ? g17(g2x.value) : "n/a") + ", herald corrected " +
                (herald.valid ? g17(herald.corrected) : "n/a") +
                (three_channel ? ", g2_heralded " + (g2h.valid ? g17(g2h.value) : "n/a") +
                                     ", g2_unheralded " + (g2nh.valid ? g17(g2nh.value) : "n/a")
                               : ""));
}

// ---- replay ----------------------------------------------------------

void write_power_scan_csv(const std::filesystem::path& path, const std::string& hash,
                          std::uint64_t seed, const std::vector<PowerPoint>& points) {
  auto os = open_csv(path, "replay",
                     {"config_hash " + hash, "seed " + std::to_string(seed)});
  os << "power_mw,n_pulses,singles_s,singles_i,n_coinc,n_acc,n_acc_raw,n_unco_per_bin,"
        "car,car_err,car_raw,car_raw_err,g2_cross,g2_cross_err,"
        "herald_raw,herald_raw_err,herald_corrected,herald_corrected_err,"
        "exp_singles_s,exp_singles_i,exp_n_coinc,exp_n_acc,exp_n_unco_per_bin,exp_car,exp_g2_cross\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const PowerPoint& p : points) {
    os << g17(p.power_mw) << ',' << p.n_pulses << ',' << g17(p.singles_s) << ','
       << g17(p.singles_i) << ',' << g17(p.decomposition.n_coinc) << ','
       << g17(p.decomposition.n_acc) << ',' << g17(p.decomposition.n_acc_raw) << ','
       << g17(p.decomposition.n_unco_per_bin) << ',' << g17(p.car.car) << ',' << g17(p.car.sigma)
       << ',' << g17(p.car.car_raw) << ',' << g17(p.car.sigma_raw) << ','
       << g17(p.g2x.valid ? p.g2x.value : nan) << ',' << g17(p.g2x.valid ? p.g2x.sigma : nan)
       << ',' << g17(p.herald.valid ? p.herald.raw : nan) << ','
       << g17(p.herald.valid ? p.herald.sigma_raw : nan) << ','
       << g17(p.herald.valid ? p.herald.corrected : nan) << ','
       << g17(p.herald.valid ? p.herald.sigma_corrected : nan) << ',' << g17(p.expected.singles_s)
       << ',' << g17(p.expected.singles_i) << ',' << g17(p.expected.n_coinc) << ','
       << g17(p.expected.n_acc) << ',' << g17(p.expected.n_unco_per_bin) << ','
       << g17(p.expected.car) << ',' << g17(p.expected.g2_cross) << "\n";
  }
}

void cmd_replay(const CommonOpts& opts) {
  const Config config = load_config(opts.config_path);
  std::filesystem::create_directories(opts.out_dir);
  const std::filesystem::path dir(opts.out_dir);
  const std::string hash = config_hash(config);

  // 1) dispersion: operating point + pressure sweep
  {
    CommonOpts sub = opts;
    cmd_phase_match(sub);
    cmd_sweep(sub);
  }

  // 2) joint spectrum at the configured grid
  {
    CommonOpts sub = opts;
    cmd_jsa(sub, 0);
  }

  // 3) two-detector power scan
  std::vector<PowerPoint> scan;
  {
    const std::vector<double> powers{10, 20, 30, 60, 100};
    for (std::size_t i = 0; i < powers.size(); ++i) {
      scan.push_back(
          run_power_point(config, powers[i], 500000000ull, opts.seed + 100 + i, opts.threads));
      say(opts, "power scan " + g17(powers[i]) + " mW: CAR " + g17(scan.back().car.car) +
                    ", g2_cross " + g17(scan.back().g2x.value));
    }
    write_power_scan_csv(dir / "power_scan.csv", hash, opts.seed, scan);
  }

  // Beamsplitter geometry shared by the autocorrelation scenarios: a lossless
  // herald path (so heralding introduces no multiphoton bias and the small-mu
  // law g2 = (1 + purity) * mu applies) feeding two 25% idler arms.
  auto splitter_detectors = [&](double herald_transmission, double arm_transmission) {
    std::vector<DetectorSpec> dets(3);
    dets[0].path_transmission = herald_transmission;
    dets[1].path_transmission = arm_transmission;
    dets[2].path_transmission = arm_transmission;
    for (DetectorSpec& d : dets) {
      d.quantum_efficiency = 1.0;
      d.dark_count_rate_hz = 0.0;
      d.jitter_fwhm_ps = config.detectors[0].jitter_fwhm_ps;
    }
    return dets;
  };

  // 4) heralded autocorrelation vs power, pair source only
  std::vector<double> g2h_powers, g2h_values, g2h_sigmas;
  double g2h_at_ref = 0.0, g2h_at_ref_err = 0.0;
  {
    const std::vector<DetectorSpec> dets = splitter_detectors(1.0, 0.25);
    auto os = open_csv(dir / "g2_heralded.csv", "replay",
                       {"config_hash " + hash, "seed " + std::to_string(opts.seed)});
    os << "power_rel,mu,n_pulses,n_s,n_si1,n_si2,n_triple,g2_heralded,g2_heralded_err\n";
    const std::vector<double> rel{0.6, 0.8, 1.0, 1.3, 1.7};
    SourceModel scen = config.source;
    scen.eta_per_mw2 = 1.04e-3;  // mu at the reference point, power_rel = 1
    for (std::size_t i = 0; i < rel.size(); ++i) {
      const std::uint64_t pulses = rel[i] <= 1.0 ? 8000000000ull : 5000000000ull;
      const ThreefoldRun run = run_threefold(scen, dets, rel[i], pulses, opts.seed + 200 + i,
                                             config.correlation.window_half_ps);
      const Ratio g2h = g2_heralded(run.triple);
      os << g17(rel[i]) << ',' << g17(pair_mean(scen, rel[i])) << ',' << pulses << ','
         << run.triple.n_s << ',' << run.triple.n_si1 << ',' << run.triple.n_si2 << ','
         << run.triple.n_triple << ',' << g17(g2h.valid ? g2h.value : 0.0) << ','
         << g17(g2h.valid ? g2h.sigma : 0.0) << "\n";
      if (g2h.valid && run.triple.n_triple > 0) {
        g2h_powers.push_back(rel[i]);
        g2h_values.push_back(g2h.value);
        g2h_sigmas.push_back(g2h.sigma);
        if (rel[i] == 1.0) {
          g2h_at_ref = g2h.value;
          g2h_at_ref_err = g2h.sigma;
        }
      }
      say(opts, "g2_heralded at mu " + g17(pair_mean(scen, rel[i])) + ": " +
                    (g2h.valid ? g17(g2h.value) : "n/a") + " (" +
                    std::to_string(run.triple.n_triple) + " triples)");
    }
  }

  // 5) heralded autocorrelation with a Raman background whose linear term
  // crosses the quadratic pair term at 0.5 mW, the saturation scenario.
  std::vector<double> raman_powers, raman_values, raman_sigmas;
  {
    const std::vector<DetectorSpec> dets = splitter_detectors(1.0, 0.25);
    SourceModel scen = config.source;
    scen.eta_per_mw2 = 1.04e-3;  // boosted rate, same power shape as the source
    // g2_H = (1+purity) eta P^2 + 2 b P: pick b so the linear/quadratic
    // coefficient ratio is 0.5 mW, putting the crossover inside the scan.
    double lam2 = 0.0, lam_sum = 0.0;
    for (double l : scen.schmidt_lambdas) {
      lam2 += l * l;
      lam_sum += l;
    }
    const double purity = lam2 / (lam_sum * lam_sum);
    scen.raman_idler_per_mw = 0.25 * (1.0 + purity) * scen.eta_per_mw2;
    auto os = open_csv(dir / "g2_heralded_raman.csv", "replay",
                       {"config_hash " + hash, "seed " + std::to_string(opts.seed)});
    os << "power_mw,mu,raman_i_per_pulse,n_pulses,n_s,n_si1,n_si2,n_triple,"
          "g2_heralded,g2_heralded_err\n";
    const std::vector<double> powers{0.4, 0.6, 1.0, 1.6, 2.5};
    const std::vector<std::uint64_t> pulse_counts{150000000000ull, 80000000000ull, 30000000000ull,
                                                  10000000000ull, 4000000000ull};
    for (std::size_t i = 0; i < powers.size(); ++i) {
      const ThreefoldRun run = run_threefold(scen, dets, powers[i], pulse_counts[i],
                                             opts.seed + 400 + i, config.correlation.window_half_ps);
      const Ratio g2h = g2_heralded(run.triple);
      os << g17(powers[i]) << ',' << g17(pair_mean(scen, powers[i])) << ','
         << g17(scen.raman_idler_per_mw * powers[i]) << ',' << pulse_counts[i] << ','
         << run.triple.n_s << ',' << run.triple.n_si1 << ',' << run.triple.n_si2 << ','
         << run.triple.n_triple << ',' << g17(g2h.valid ? g2h.value : 0.0) << ','
         << g17(g2h.valid ? g2h.sigma : 0.0) << "\n";
      if (g2h.valid && run.triple.n_triple > 0) {
        raman_powers.push_back(powers[i]);
        raman_values.push_back(g2h.value);
        raman_sigmas.push_back(g2h.sigma);
      }
      say(opts, "g2_heralded (raman) at " + g17(powers[i]) + " mW: " +
                    (g2h.valid ? g17(g2h.value) : "n/a") + " (" +
                    std::to_string(run.triple.n_triple) + " triples)");
    }
  }

  // 6) unheralded autocorrelation of the idler arm for three mode mixes
  std::vector<double> g2nh_values, g2nh_expected;
  {
    auto os = open_csv(dir / "g2_unheralded.csv", "replay",
                       {"config_hash " + hash, "seed " + std::to_string(opts.seed)});
    os << "case,expected,n_pulses,n_i1,n_i2,n_pairs,g2_unheralded,g2_unheralded_err,"
          "purity_from_g2\n";
    struct Case {
      const char* name;
      std::vector<double> lambdas;
    };
    const std::vector<Case> cases = {{"single_mode", {1.0}},
                                     {"two_mode_equal", {0.5, 0.5}},
                                     {"reference", config.source.schmidt_lambdas}};
    for (std::size_t i = 0; i < cases.size(); ++i) {
      SourceModel scen = config.source;
      scen.schmidt_lambdas = cases[i].lambdas;
      scen.eta_per_mw2 = 0.05;  // boosted mean so the thermal excess converges fast
      const std::vector<DetectorSpec> dets = splitter_detectors(0.5, 0.4);
      double lam2 = 0.0;
      double lam_sum = 0.0;
      for (double l : cases[i].lambdas) {
        lam2 += l * l;
        lam_sum += l;
      }
      const double expected = 1.0 + lam2 / (lam_sum * lam_sum);
      const ThreefoldRun run = run_threefold(scen, dets, 1.0, 1000000000ull, opts.seed + 300 + i,
                                             config.correlation.window_half_ps);
      const Ratio g2nh = g2_unheralded(run.arm_pair, run.n_pulses);
      const double purity_from_g2 =
          g2nh.valid ? std::clamp(g2nh.value - 1.0, 0.0, 1.0) : 0.0;
      os << cases[i].name << ',' << g17(expected) << ',' << run.n_pulses << ','
         << run.arm_pair.n_a << ',' << run.arm_pair.n_b << ',' << run.arm_pair.n_matched << ','
         << g17(g2nh.valid ? g2nh.value : 0.0) << ',' << g17(g2nh.valid ? g2nh.sigma : 0.0) << ','
         << g17(purity_from_g2) << "\n";
      if (g2nh.valid) {
        g2nh_values.push_back(g2nh.value);
        g2nh_expected.push_back(expected);
      }
      say(opts, std::string("g2_unheralded ") + cases[i].name + ": " +
                    (g2nh.valid ? g17(g2nh.value) : "n/a") + " (expect " + g17(expected) + ")");
    }
  }

  // 7) cross-scan fits and the summary document
  {
    std::vector<double> powers, coinc, acc, singles_s, g2x_vals;
    for (const PowerPoint& p : scan) {
      powers.push_back(p.power_mw);
      coinc.push_back(p.decomposition.n_coinc);
      acc.push_back(p.decomposition.n_acc);
      singles_s.push_back(p.singles_s);
      if (p.g2x.valid) g2x_vals.push_back(p.g2x.value);
    }

    // Slopes on relative-error weights; accidentals need the points where the
    // side-peak excess is resolved, so drop entries below ~5 counts.
    auto rel_sigma = [](const std::vector<double>& y) {
      std::vector<double> s;
      for (double v : y) s.push_back(std::sqrt(std::max(v, 1.0)));
      return s;
    };
    const LineFit coinc_fit = fit_log_slope(powers, coinc, rel_sigma(coinc));
    std::vector<double> acc_p, acc_y;
    for (std::size_t i = 0; i < powers.size(); ++i)
      if (acc[i] > 5.0) {
        acc_p.push_back(powers[i]);
        acc_y.push_back(acc[i]);
      }
    const LineFit acc_fit = fit_log_slope(acc_p, acc_y, rel_sigma(acc_y));

    // Quadratic-coefficient ratio of accidentals to coincidences recovers the
    // pair probability per pulse per mW^2.
    const PowerLawFit coinc_pl = fit_power_law(powers, coinc, {2});
    const PowerLawFit acc_pl = fit_power_law(acc_p, acc_y, {4});
    const double eta_from_ratio =
        coinc_pl.coefficients[0] > 0.0 ? acc_pl.coefficients[0] / coinc_pl.coefficients[0] : 0.0;

    // Signal singles: quadratic rate with darks as the constant term; the
    // linear term should be consistent with zero without Raman.
    const PowerLawFit singles_fit = fit_power_law(powers, singles_s, {0, 1, 2});
    const double linear_z = term_significance_z(powers, singles_s, {0, 1, 2}, 1);
    const double duration_s =
        static_cast<double>(scan.front().n_pulses) * config.source.pulse_period_ps * 1e-12;
    const double c_s_rate = singles_fit.coefficients[2] / duration_s;

    const double eta_inferred = infer_eta(powers, g2x_vals);

    const LineFit g2h_fit = fit_log_slope(g2h_powers, g2h_values, g2h_sigmas);
    const LineFit raman_fit = fit_log_slope(raman_powers, raman_values, raman_sigmas);

    nlohmann::json summary;
    summary["config_hash"] = hash;
    summary["seed"] = opts.seed;
    summary["power_scan"] = {
        {"powers_mw", powers},
        {"n_coinc_log_slope", coinc_fit.slope},
        {"n_coinc_log_slope_err", coinc_fit.slope_sigma},
        {"n_acc_log_slope", acc_fit.slope},
        {"n_acc_log_slope_err", acc_fit.slope_sigma},
        {"eta_from_acc_coinc_ratio_per_mw2", eta_from_ratio},
        {"eta_inferred_from_g2_per_mw2", eta_inferred},
        {"eta_configured_per_mw2", config.source.eta_per_mw2},
        {"singles_s_quadratic_per_s_mw2", c_s_rate},
        {"singles_s_linear_term_z", linear_z},
    };
    const PowerPoint& p30 = scan[2];
    summary["car_at_30mw"] = {{"value", p30.car.car},
                              {"sigma", p30.car.sigma},
                              {"analytic", p30.expected.car}};
    const PowerPoint& p20 = scan[1];
    summary["heralding_at_20mw"] = {
        {"raw", p20.herald.valid ? p20.herald.raw : 0.0},
        {"corrected", p20.herald.valid ? p20.herald.corrected : 0.0},
        {"corrected_sigma", p20.herald.valid ? p20.herald.sigma_corrected : 0.0}};
    summary["g2_heralded"] = {
        {"at_reference_mu", g2h_at_ref},
        {"at_reference_mu_err", g2h_at_ref_err},
        {"log_slope", g2h_fit.slope},
        {"log_slope_err", g2h_fit.slope_sigma},
        {"raman_log_slope", raman_fit.slope},
        {"raman_log_slope_err", raman_fit.slope_sigma},
    };
    summary["g2_unheralded"] = {{"values", g2nh_values}, {"expected", g2nh_expected}};

    std::ofstream os(dir / "summary.json", std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + (dir / "summary.json").string());
    os << summary.dump(2) << "\n";
    say(opts, "slopes: coinc " + g17(coinc_fit.slope) + ", acc " + g17(acc_fit.slope) +
                  ", g2h " + g17(g2h_fit.slope) + ", g2h+raman " + g17(raman_fit.slope));
  }

  say(opts, "replay complete; outputs in " + opts.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulsed photon-pair source toolbox: dispersion, joint spectrum, tag simulation, "
               "correlation, estimators"};
  app.require_subcommand(1);

  CommonOpts opts;
  opts.threads = env_threads();

  double power_mw = 0.0;
  std::uint64_t n_pulses = 100000000ull;
  bool three_channel = false;
  std::string run_dir = ".";
  int grid_override = 0;

  auto* pm = app.add_subcommand("phase-match", "solve the degenerate four-wave-mixing operating point");
  add_common(pm, opts);
  pm->callback([&] { cmd_phase_match(opts); });

  auto* sw = app.add_subcommand("sweep", "phase-matched wavelengths across a pressure range");
  add_common(sw, opts);
  sw->callback([&] { cmd_sweep(opts); });

  auto* js = app.add_subcommand("jsa", "joint spectral amplitude and Schmidt decomposition");
  add_common(js, opts);
  js->add_option("--grid", grid_override, "override grid points per axis");
  js->callback([&] { cmd_jsa(opts, grid_override); });

  auto* si = app.add_subcommand("simulate", "generate detector time tags");
  add_common(si, opts);
  si->add_option("--power-mw", power_mw, "average pump power (default: config)");
  si->add_option("--pulses", n_pulses, "number of pump pulses")->capture_default_str();
  si->add_flag("--three-channel", three_channel, "split the idler onto two detectors");
  si->callback([&] { cmd_simulate(opts, power_mw, n_pulses, three_channel); });

  auto* co = app.add_subcommand("correlate", "delay histogram and coincidence decomposition");
  add_common(co, opts);
  co->add_option("--run", run_dir, "directory with run.json and tag files")->capture_default_str();
  co->callback([&] { cmd_correlate(opts, run_dir); });

  auto* an = app.add_subcommand("analyze", "estimator battery for a simulated run");
  add_common(an, opts);
  an->add_option("--run", run_dir, "directory with run.json and tag files")->capture_default_str();
  an->callback([&] { cmd_analyze(opts, run_dir); });

  auto* rp = app.add_subcommand("replay", "run the full reference-experiment pipeline");
  add_common(rp, opts);
  rp->callback([&] { cmd_replay(opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
