// Acceptance battery for the pair-source toolbox.
//
// Eleven numbered end-to-end checks covering the dispersion solver, the
// joint-spectrum purity, the simulated power scans with their estimator
// closures, correlator correctness against brute-force oracles, throughput,
// and determinism. Each check prints exactly one PASS/FAIL line with the
// measured numbers; the exit status is nonzero if any check fails.
//
// Usage: acceptance [--data-dir <repo root>] [--fwmlab <path to CLI binary>]

#include <sys/wait.h>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fwm/config.hpp"
#include "fwm/constants.hpp"
#include "fwm/correlator.hpp"
#include "fwm/estimators.hpp"
#include "fwm/fiber.hpp"
#include "fwm/jsa.hpp"
#include "fwm/replay.hpp"
#include "fwm/rng.hpp"
#include "fwm/source.hpp"
#include "fwm/tag_io.hpp"

namespace {

using namespace fwm;

int g_failures = 0;

void gate(int id, bool ok, const char* format, ...) {
  char detail[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(detail, sizeof detail, format, args);
  va_end(args);
  std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Purity by the Gram-matrix trace identity, independent of the SVD route:
// for G = A A^dagger, purity = tr(G^2) / tr(G)^2.
double purity_by_trace(const JsaGrid& grid) {
  const auto n_s = static_cast<Eigen::Index>(grid.omega_s.size());
  const auto n_i = static_cast<Eigen::Index>(grid.omega_i.size());
  Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      a(grid.amplitude.data(), n_s, n_i);
  const Eigen::MatrixXcd gram = a * a.adjoint();
  const double tr = gram.trace().real();
  return (gram * gram).trace().real() / (tr * tr);
}

// Three-detector geometry shared by the autocorrelation scenarios: ideal
// detectors, a configurable herald path and two splitter arms.
std::vector<DetectorSpec> splitter_detectors(const Config& config, double herald_transmission,
                                             double arm_transmission) {
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
}

double purity_of(const std::vector<double>& lambdas) {
  double sum = 0.0;
  double sum2 = 0.0;
  for (double l : lambdas) {
    sum += l;
    sum2 += l * l;
  }
  return sum2 / (sum * sum);
}

std::vector<double> sqrt_sigmas(const std::vector<double>& y) {
  std::vector<double> s;
  s.reserve(y.size());
  for (double v : y) s.push_back(std::sqrt(std::max(v, 1.0)));
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---- randomized correlator instances (check 9) -----------------------------

std::vector<std::int64_t> random_tags(RngStream& rng, std::size_t n, std::int64_t t_max,
                                      std::int64_t quantum) {
  std::vector<std::int64_t> tags(n);
  for (auto& t : tags) {
    t = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(t_max + 1)));
    if (quantum > 1) t -= t % quantum;
  }
  std::sort(tags.begin(), tags.end());
  return tags;
}

std::vector<std::uint64_t> naive_histogram(const std::vector<std::int64_t>& a,
                                           const std::vector<std::int64_t>& b,
                                           std::int64_t width, std::int64_t bins_per_side) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * bins_per_side), 0);
  const std::int64_t range = width * bins_per_side;
  for (std::int64_t t_a : a)
    for (std::int64_t t_b : b) {
      const std::int64_t d = t_b - t_a;
      if (d < -range || d >= range) continue;
      const auto bin = static_cast<std::int64_t>(
          std::floor(static_cast<double>(d) / static_cast<double>(width)));
      ++counts[static_cast<std::size_t>(bin + bins_per_side)];
    }
  return counts;
}

std::uint64_t naive_window_pairs(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b, std::int64_t w) {
  std::uint64_t n = 0;
  for (std::int64_t t_a : a)
    for (std::int64_t t_b : b)
      if (std::llabs(t_b - t_a) <= w) ++n;
  return n;
}

std::uint64_t greedy_pairs(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                           std::int64_t w) {
  std::uint64_t matched = 0;
  std::size_t p = 0;
  for (std::int64_t t : a) {
    while (p < b.size() && b[p] < t - w) ++p;
    if (p < b.size() && b[p] <= t + w) {
      ++p;
      ++matched;
    }
  }
  return matched;
}

TripleCounts greedy_triples(const std::vector<std::int64_t>& s,
                            const std::vector<std::int64_t>& i1,
                            const std::vector<std::int64_t>& i2, std::int64_t w) {
  TripleCounts c;
  c.n_s = s.size();
  c.n_i1 = i1.size();
  c.n_i2 = i2.size();
  std::size_t p1 = 0, p2 = 0;
  for (std::int64_t t : s) {
    while (p1 < i1.size() && i1[p1] < t - w) ++p1;
    const bool m1 = p1 < i1.size() && i1[p1] <= t + w;
    if (m1) ++p1;
    while (p2 < i2.size() && i2[p2] < t - w) ++p2;
    const bool m2 = p2 < i2.size() && i2[p2] <= t + w;
    if (m2) ++p2;
    c.n_si1 += m1;
    c.n_si2 += m2;
    c.n_triple += m1 && m2;
  }
  return c;
}

bool correlator_instance_ok(std::uint64_t index) {
  RngStream rng(5000 + index, 0, 0);
  const std::int64_t t_max_options[4] = {60, 5'000, 400'000, 40'000'000};
  const std::int64_t t_max = t_max_options[rng.uniform_below(4)];
  const std::int64_t quantum = rng.uniform_below(3) == 0 ? 7 : 1;
  std::vector<std::int64_t> a = random_tags(rng, rng.uniform_below(301), t_max, quantum);
  std::vector<std::int64_t> b = random_tags(rng, rng.uniform_below(301), t_max, quantum);
  std::vector<std::int64_t> c = random_tags(rng, rng.uniform_below(301), t_max, quantum);
  if (rng.uniform_below(12) == 0) b = a;
  if (rng.uniform_below(12) == 0) b.clear();

  const std::int64_t widths[4] = {1, 7, 100, 1400};
  const std::int64_t sides[4] = {3, 10, 50, 500};
  const std::int64_t windows[4] = {1, 5, 100, 2100};
  const std::int64_t width = widths[rng.uniform_below(4)];
  const std::int64_t bins_per_side = sides[rng.uniform_below(4)];
  const std::int64_t window = windows[rng.uniform_below(4)];

  const DelayHistogram fast = cross_histogram(a, b, width, bins_per_side);
  const DelayHistogram brute = brute_force_histogram(a, b, width, bins_per_side);
  const std::vector<std::uint64_t> naive = naive_histogram(a, b, width, bins_per_side);
  if (fast.counts != naive || brute.counts != naive) return false;
  if (fast.n_a != a.size() || fast.n_b != b.size()) return false;

  const PairCounts greedy = match_pairs(a, b, window);
  if (greedy.n_matched != greedy_pairs(a, b, window)) return false;
  const PairCounts all = count_window_pairs(a, b, window);
  if (all.n_matched != naive_window_pairs(a, b, window)) return false;

  const TripleCounts lib = threefold(a, b, c, window);
  const TripleCounts ref = greedy_triples(a, b, c, window);
  return lib.n_si1 == ref.n_si1 && lib.n_si2 == ref.n_si2 && lib.n_triple == ref.n_triple;
}

// Delays placed exactly on the histogram-range and window boundaries.
bool correlator_edges_ok() {
  const std::vector<std::int64_t> a = {1000};
  const std::vector<std::int64_t> b = {499, 500, 900, 999, 1000, 1099, 1100, 1499, 1500};
  const std::int64_t width = 100;
  const std::int64_t bins_per_side = 5;  // histogram covers delays [-500, 500)

  const DelayHistogram fast = cross_histogram(a, b, width, bins_per_side);
  const DelayHistogram brute = brute_force_histogram(a, b, width, bins_per_side);
  if (fast.counts != naive_histogram(a, b, width, bins_per_side)) return false;
  if (fast.counts != brute.counts) return false;
  std::uint64_t total = 0;
  for (std::uint64_t v : fast.counts) total += v;
  if (total != 7) return false;                 // -501 and +500 fall outside
  if (fast.count_at(-5) != 1) return false;     // delay -500 lands in the lowest bin
  if (fast.count_at(4) != 1) return false;      // delay 499 lands in the highest bin

  // Matching windows are closed: |d| <= 100 pairs with delays -100..100.
  const PairCounts all = count_window_pairs(a, b, 100);
  return all.n_matched == 5 && all.n_matched == naive_window_pairs(a, b, 100);
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_dir;
  std::string fwmlab_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--data-dir" && i + 1 < argc)
      data_dir = argv[++i];
    else if (arg == "--fwmlab" && i + 1 < argc)
      fwmlab_path = argv[++i];
  }

  const int threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, 8);

  Config config = default_config();
  if (!data_dir.empty()) {
    const std::string shipped = data_dir + "/configs/reference_run.json";
    if (std::filesystem::exists(shipped)) config = load_config(shipped);
  }

  // 1 -- dispersion operating point and pressure tuning range -----------------
  double in_process_seconds = 0.0;
  {
    Stopwatch timer;
    const PhaseMatchReport report = phase_match_report(config);
    const double dt = timer.seconds();
    in_process_seconds += dt;

    bool ok_point = report.solution.has_value();
    double signal_nm = 0.0, idler_nm = 0.0, detuning_thz = 0.0;
    if (ok_point) {
      signal_nm = report.solution->lambda_s_m * 1e9;
      idler_nm = report.solution->lambda_i_m * 1e9;
      detuning_thz = report.solution->detuning_rad_s / (2.0 * kPi) / 1e12;
      ok_point = std::fabs(signal_nm - 770.0) <= 15.0 && std::fabs(idler_nm - 1570.0) <= 30.0 &&
                 std::fabs(detuning_thz - 99.3) <= 2.0;
    }

    double sweep_min = 1e9, sweep_max = 0.0;
    for (const PressureSweepRow& row : report.sweep) {
      const double bar = row.pressure_pa / 1e5;
      if (bar < 2.0 - 1e-9 || bar > 5.0 + 1e-9 || !row.solution) continue;
      const double nm = row.solution->lambda_i_m * 1e9;
      sweep_min = std::min(sweep_min, nm);
      sweep_max = std::max(sweep_max, nm);
    }
    const bool ok_sweep = sweep_min <= 1530.0 && sweep_max >= 1625.0;

    gate(1, ok_point && ok_sweep && dt < 5.0,
           "phase matching: signal %.2f nm, idler %.2f nm, detuning %.3f THz; "
           "2-5 bar sweep idler %.0f..%.0f nm; %.2f s",
           signal_nm, idler_nm, detuning_thz, sweep_min, sweep_max, dt);
  }

  // 2 -- filtered spectral purity and the SVD-vs-trace identity ---------------
  {
    Stopwatch timer;
    const JsaReport jsa = jsa_report(config, 0);

    const auto pm = solve_phase_match(config.pump, config.gas, config.fiber);
    const JsaWindow window = default_jsa_window(*pm, config.filter_signal, config.filter_idler,
                                                config.jsa_span_filter_widths, config.jsa_grid);
    const JsaGrid amplitude = build_jsa(config.pump, config.gas, config.fiber, window, &*pm);
    const JsaGrid filtered = apply_filters(amplitude, config.filter_signal, config.filter_idler);
    const double trace_purity = purity_by_trace(filtered);
    const double dt = timer.seconds();
    in_process_seconds += dt;

    const bool ok_band = jsa.purity_filtered >= 0.75 && jsa.purity_filtered <= 0.90;
    const double gap = std::fabs(jsa.purity_filtered - trace_purity);
    gate(2, ok_band && gap <= 1e-9 && dt < 10.0,
           "filtered purity %.6f in [0.75, 0.90]; SVD vs trace oracle gap %.2e; "
           "grid %d^2; %.2f s",
           jsa.purity_filtered, gap, jsa.grid_points, dt);
  }

  // 3/4/5/8 -- simulated power scan and its estimator closures ----------------
  std::vector<PowerPoint> scan;
  {
    const std::vector<double> powers{10, 20, 30, 60, 100};
    Stopwatch timer;
    for (std::size_t i = 0; i < powers.size(); ++i)
      scan.push_back(run_power_point(config, powers[i], 500000000ull, 101 + i, threads));
    const double dt = timer.seconds();
    in_process_seconds += dt;

    std::vector<double> singles_s, coinc, acc_p, acc_y;
    for (const PowerPoint& p : scan) {
      singles_s.push_back(p.singles_s);
      coinc.push_back(p.decomposition.n_coinc);
      if (p.decomposition.n_acc > 5.0) {
        acc_p.push_back(p.power_mw);
        acc_y.push_back(p.decomposition.n_acc);
      }
    }

    // 3: singles rate law c_d + c_lin P + c_s P^2; the linear term must be
    // consistent with zero and the quadratic rate near the reference value.
    const PowerLawFit singles_fit = fit_power_law(powers, singles_s, {0, 1, 2});
    const double linear_z = term_significance_z(powers, singles_s, {0, 1, 2}, 1);
    const double quad_z = term_significance_z(powers, singles_s, {0, 1, 2}, 2);
    const double duration_s = static_cast<double>(scan.front().duration_ps) * 1e-12;
    const double c_s_rate = singles_fit.coefficients[2] / duration_s;
    const bool ok_cs = c_s_rate >= 0.66 / 2.0 && c_s_rate <= 0.66 * 2.0;
    gate(3, ok_cs && linear_z < 3.0 && quad_z > 5.0 && dt < 600.0,
           "singles power law: quadratic %.3f /s/mW^2 (reference 0.66, factor %.2f), "
           "linear-term z %.2f, quadratic z %.0f; 5x5e8 pulses in %.0f s",
           c_s_rate, c_s_rate / 0.66, linear_z, quad_z, dt);

    // 4: coincidence and accidental exponents, and their quadratic-coefficient
    // ratio recovering the configured pair rate.
    const LineFit coinc_fit = fit_log_slope(powers, coinc, sqrt_sigmas(coinc));
    const LineFit acc_fit = fit_log_slope(acc_p, acc_y, sqrt_sigmas(acc_y));
    const PowerLawFit coinc_pl = fit_power_law(powers, coinc, {2});
    const PowerLawFit acc_pl = fit_power_law(acc_p, acc_y, {4});
    const double eta_ratio = acc_pl.coefficients[0] / coinc_pl.coefficients[0];
    const double eta_err = eta_ratio / config.source.eta_per_mw2 - 1.0;
    gate(4,
           std::fabs(coinc_fit.slope - 2.0) <= 0.15 && std::fabs(acc_fit.slope - 4.0) <= 0.25 &&
               std::fabs(eta_err) <= 0.15,
           "histogram power laws: coincidence slope %.3f+-%.3f (2.0+-0.15), accidental slope "
           "%.2f+-%.2f (4.0+-0.25), acc/coinc ratio %.3e vs configured %.1e (%+.1f%%)",
           coinc_fit.slope, coinc_fit.slope_sigma, acc_fit.slope, acc_fit.slope_sigma, eta_ratio,
           config.source.eta_per_mw2, 100.0 * eta_err);

    // 5: coincidence-to-accidental ratio level and its dark-count saturation.
    const CarResult& car30 = scan[2].car;
    const CarResult& car10 = scan[0].car;
    const double car_reference = 442.0;
    const bool ok_level = car30.valid && std::fabs(car30.car - car_reference) <= 3.0 * car30.sigma;
    const double extrapolated_10 = car30.car * 9.0;  // inverse-square from 30 mW
    const bool ok_saturation = car10.valid && car10.car < 0.8 * extrapolated_10;
    gate(5, ok_level && ok_saturation,
           "CAR at 30 mW %.1f+-%.1f vs reference %.0f (%.2f sigma); at 10 mW %.1f, "
           "below the inverse-square extrapolation %.0f",
           car30.car, car30.sigma, car_reference,
           car30.valid ? std::fabs(car30.car - car_reference) / car30.sigma : 99.0, car10.car,
           extrapolated_10);
  }

  // 6 -- heralded autocorrelation: level, exponent, saturation ----------------
  {
    Stopwatch timer;
    SourceModel scen = config.source;
    scen.eta_per_mw2 = 1.04e-3;  // pair probability at the reference point
    const std::vector<DetectorSpec> dets = splitter_detectors(config, 1.0, 0.25);

    const std::vector<double> rel{0.6, 0.8, 1.0, 1.3, 1.7};
    std::vector<double> values, sigmas;
    double at_reference = 0.0, at_reference_err = 0.0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      const std::uint64_t pulses = rel[i] <= 1.0 ? 8000000000ull : 5000000000ull;
      const ThreefoldRun run = run_threefold(scen, dets, rel[i], pulses, 201 + i,
                                             config.correlation.window_half_ps);
      const Ratio g2 = g2_heralded(run.triple);
      values.push_back(g2.value);
      sigmas.push_back(g2.sigma);
      if (rel[i] == 1.0) {
        at_reference = g2.value;
        at_reference_err = g2.sigma;
      }
    }
    const LineFit clean_fit = fit_log_slope(rel, values, sigmas);

    // Saturation scenario: a linear background term crossing the quadratic
    // pair term at 0.5 mW drags the fitted exponent visibly below 2.
    SourceModel raman = scen;
    raman.raman_idler_per_mw = 0.25 * (1.0 + purity_of(scen.schmidt_lambdas)) * scen.eta_per_mw2;
    const std::vector<double> powers{0.4, 0.6, 1.0, 1.6, 2.5};
    const std::vector<std::uint64_t> pulse_counts{150000000000ull, 80000000000ull, 30000000000ull,
                                                  10000000000ull, 4000000000ull};
    std::vector<double> r_values, r_sigmas;
    for (std::size_t i = 0; i < powers.size(); ++i) {
      const ThreefoldRun run = run_threefold(raman, dets, powers[i], pulse_counts[i], 401 + i,
                                             config.correlation.window_half_ps);
      const Ratio g2 = g2_heralded(run.triple);
      r_values.push_back(g2.value);
      r_sigmas.push_back(g2.sigma);
    }
    const LineFit raman_fit = fit_log_slope(powers, r_values, r_sigmas);
    const double dt = timer.seconds();
    in_process_seconds += dt;

    const bool ok_level = at_reference >= 0.001 && at_reference <= 0.003;
    const bool ok_slope = std::fabs(clean_fit.slope - 2.0) <= 0.2;
    const bool ok_saturated = raman_fit.slope + 3.0 * raman_fit.slope_sigma < 2.0;
    gate(6, ok_level && ok_slope && ok_saturated,
           "heralded g2 %.2e+-%.1e in [1e-3, 3e-3]; exponent %.3f+-%.3f (2.0+-0.2); "
           "with linear background %.3f+-%.3f (< 2 at 3 sigma); %.0f s",
           at_reference, at_reference_err, clean_fit.slope, clean_fit.slope_sigma,
           raman_fit.slope, raman_fit.slope_sigma, dt);
  }

  // 7 -- unheralded autocorrelation tracks the mode spectrum ------------------
  {
    Stopwatch timer;
    struct Case {
      const char* name;
      std::vector<double> lambdas;
    };
    const std::vector<Case> cases = {{"single-mode", {1.0}},
                                     {"two equal modes", {0.5, 0.5}},
                                     {"reference spectrum", config.source.schmidt_lambdas}};
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      SourceModel scen = config.source;
      scen.schmidt_lambdas = cases[i].lambdas;
      scen.eta_per_mw2 = 0.05;  // boosted mean so the thermal excess converges fast
      const ThreefoldRun run =
          run_threefold(scen, splitter_detectors(config, 0.5, 0.4), 1.0, 1000000000ull, 301 + i,
                        config.correlation.window_half_ps);
      const Ratio g2 = g2_unheralded(run.arm_pair, run.n_pulses);
      const double expected = 1.0 + purity_of(cases[i].lambdas);
      ok = ok && g2.valid && std::fabs(g2.value - expected) <= 0.05;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s%s %.4f (expect %.4f)", i ? "; " : "", cases[i].name,
                    g2.value, expected);
      detail += buf;
    }
    const double dt = timer.seconds();
    in_process_seconds += dt;
    gate(7, ok, "unheralded g2 within 0.05: %s; %.0f s", detail.c_str(), dt);
  }

  // 8 -- corrected heralding efficiency ---------------------------------------
  {
    const HeraldEfficiency& herald = scan[1].herald;  // the 20 mW point
    const bool ok = herald.valid && herald.corrected >= 0.24 && herald.corrected <= 0.33;
    gate(8, ok, "heralding efficiency (20 mW): raw %.4f, corrected %.4f+-%.4f in [0.24, 0.33]",
           herald.raw, herald.corrected, herald.sigma_corrected);
  }

  // 9 -- correlator vs brute-force oracles on randomized instances ------------
  {
    Stopwatch timer;
    int bad = 0;
    for (std::uint64_t i = 0; i < 200; ++i)
      if (!correlator_instance_ok(i)) ++bad;
    const bool edges = correlator_edges_ok();
    const double dt = timer.seconds();
    in_process_seconds += dt;
    gate(9, bad == 0 && edges,
           "correlator equals brute force on %d/200 randomized instances; boundary delays %s; "
           "%.1f s",
           200 - bad, edges ? "exact" : "WRONG", dt);
  }

  // 10 -- throughput and the end-to-end pipeline budget ------------------------
  {
    // Two Poisson streams at 2e5 tags/s each, 2e6 tags per stream.
    std::vector<std::int64_t> a, b;
    for (int channel = 0; channel < 2; ++channel) {
      RngStream rng(123, static_cast<std::uint64_t>(channel), 0);
      std::vector<std::int64_t>& out = channel ? b : a;
      out.reserve(2000000);
      std::int64_t t = 0;
      for (std::size_t i = 0; i < 2000000; ++i) {
        const double gap = -5e6 * std::log(rng.uniform01_open_low());
        t += std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(gap)));
        out.push_back(t);
      }
    }
    Stopwatch timer;
    const DelayHistogram hist = cross_histogram(a, b);
    const double dt = timer.seconds();
    const double tags_per_s = static_cast<double>(hist.n_a + hist.n_b) / dt;
    const bool ok_throughput = tags_per_s >= 1e7;

    // Full pipeline wall clock: run the shipped command end to end when the
    // binary path is provided, otherwise fall back to the in-process total of
    // the stages above (the same workload).
    double pipeline_s = 0.0;
    bool ok_pipeline = false;
    const char* pipeline_kind = "in-process stages";
    if (!fwmlab_path.empty()) {
      pipeline_kind = "replay command";
      const std::string out_dir =
          (std::filesystem::temp_directory_path() / "fwm_acceptance_replay").string();
      std::filesystem::remove_all(out_dir);
      const std::string cmd = "\"" + fwmlab_path + "\" replay --quiet --seed 1 --threads " +
                              std::to_string(threads) + " --out \"" + out_dir +
                              "\" > /dev/null 2>&1";
      Stopwatch replay_timer;
      const int rc = std::system(cmd.c_str());
      pipeline_s = replay_timer.seconds();
      ok_pipeline = rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0 && pipeline_s < 900.0;
    } else {
      pipeline_s = in_process_seconds + dt;
      ok_pipeline = pipeline_s < 900.0;
    }
    gate(10, ok_throughput && ok_pipeline,
           "histogram throughput %.1fM tags/s (>= 10M); %s %.0f s (< 900 s)", tags_per_s / 1e6,
           pipeline_kind, pipeline_s);
  }

  // 11 -- byte-identical tags and metrics at any thread count ------------------
  {
    auto run_with = [&](int n_threads) {
      RunOptions options;
      options.threads = n_threads;
      return simulate_run(config.source, config.detectors, 30.0, 20000000ull, 424242, options);
    };
    const RunResult one = run_with(1);
    const RunResult three = run_with(3);
    const RunResult six = run_with(6);

    bool ok_tags = one.streams.size() == six.streams.size() &&
                   one.streams.size() == three.streams.size();
    for (std::size_t c = 0; ok_tags && c < one.streams.size(); ++c)
      ok_tags = one.streams[c].timestamps == six.streams[c].timestamps &&
                one.streams[c].timestamps == three.streams[c].timestamps;

    const auto dir = std::filesystem::temp_directory_path() / "fwm_acceptance_det";
    std::filesystem::create_directories(dir);
    write_tag_file((dir / "one.ptag").string(), one.streams[0]);
    write_tag_file((dir / "six.ptag").string(), six.streams[0]);
    const bool ok_bytes = slurp((dir / "one.ptag").string()) == slurp((dir / "six.ptag").string());

    auto metrics = [&](const RunResult& run) {
      const DelayHistogram hist =
          cross_histogram(run.streams[0].timestamps, run.streams[1].timestamps,
                          config.correlation.bin_width_ps, config.correlation.bins_per_side);
      return decompose(hist, config.source.pulse_period_ps, config.correlation.window_half_ps,
                       config.correlation.side_peaks);
    };
    const HistogramDecomposition d1 = metrics(one);
    const HistogramDecomposition d6 = metrics(six);
    const bool ok_metrics = d1.n_coinc == d6.n_coinc && d1.n_acc == d6.n_acc &&
                            d1.n_unco_per_bin == d6.n_unco_per_bin;

    gate(11, ok_tags && ok_bytes && ok_metrics,
           "determinism: 1/3/6 worker threads give identical tag streams "
           "(%zu + %zu tags), identical file bytes, identical metrics",
           one.streams[0].timestamps.size(), one.streams[1].timestamps.size());
  }

  std::printf("%s: %d/11 criteria passed\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              11 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
