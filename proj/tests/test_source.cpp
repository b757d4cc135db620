#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fwm/source.hpp"

using namespace fwm;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments pair_total_moments(const SourceModel& model, double power_mw, std::size_t n_draws) {
  RngStream rng(42, 0, 0);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const PulseDraw d = draw_pulse(model, power_mw, rng);
    double total = 0.0;
    for (std::uint32_t c : d.pairs_per_mode) total += c;
    sum += total;
    sum2 += total * total;
  }
  const double mean = sum / static_cast<double>(n_draws);
  return {mean, sum2 / static_cast<double>(n_draws) - mean * mean};
}

bool is_sorted_tags(const std::vector<std::int64_t>& t) {
  return std::is_sorted(t.begin(), t.end());
}

}  // namespace

TEST_CASE("thermal pulse draws have Bose-Einstein moments") {
  SourceModel model;
  model.eta_per_mw2 = 0.8;
  model.schmidt_lambdas = {1.0};
  const double mu = pair_mean(model, 1.0);
  CHECK(mu == doctest::Approx(0.8));

  const std::size_t n = 4'000'000;
  const Moments m = pair_total_moments(model, 1.0, n);
  // Mean mu, variance mu (1 + mu) for a single thermal mode.
  CHECK(m.mean == doctest::Approx(mu).epsilon(0.005));
  CHECK(m.var == doctest::Approx(mu * (1.0 + mu)).epsilon(0.02));
}

TEST_CASE("multi-mode thermal variance adds per mode") {
  SourceModel model;
  model.eta_per_mw2 = 0.8;
  model.schmidt_lambdas = {0.5, 0.5};
  const double mu = 0.8;
  const Moments m = pair_total_moments(model, 1.0, 4'000'000);
  // Two equal modes: var = sum_k lam_k mu (1 + lam_k mu) = mu + mu^2 / 2.
  CHECK(m.mean == doctest::Approx(mu).epsilon(0.005));
  CHECK(m.var == doctest::Approx(mu + 0.5 * mu * mu).epsilon(0.02));
}

TEST_CASE("poisson pair statistics remove the bunching variance") {
  SourceModel model;
  model.eta_per_mw2 = 0.8;
  model.poisson_pairs = true;
  const Moments m = pair_total_moments(model, 1.0, 4'000'000);
  CHECK(m.mean == doctest::Approx(0.8).epsilon(0.005));
  CHECK(m.var == doctest::Approx(0.8).epsilon(0.02));  // != 1.44 thermal
}

TEST_CASE("raman photon numbers are Poisson in each band") {
  SourceModel model;
  model.eta_per_mw2 = 0.0;
  model.raman_signal_per_mw = 0.3;
  model.raman_idler_per_mw = 0.15;
  RngStream rng(7, 0, 0);
  const std::size_t n = 2'000'000;
  double ssum = 0.0, ssum2 = 0.0, isum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PulseDraw d = draw_pulse(model, 2.0, rng);
    ssum += d.raman_signal;
    ssum2 += static_cast<double>(d.raman_signal) * d.raman_signal;
    isum += d.raman_idler;
  }
  const double smean = ssum / n;
  CHECK(smean == doctest::Approx(0.6).epsilon(0.01));
  CHECK(ssum2 / n - smean * smean == doctest::Approx(0.6).epsilon(0.02));
  CHECK(isum / n == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("zero-efficiency detectors record only dark counts") {
  SourceModel model;
  model.eta_per_mw2 = 0.0;
  DetectorSpec det;
  det.dark_count_rate_hz = 200e3;
  const std::uint64_t n_pulses = 200'000;  // 0.1 s at 2 MHz
  const RunResult run = simulate_run(model, {det, det}, 30.0, n_pulses, 11);

  REQUIRE(run.streams.size() == 2);
  CHECK(run.duration_ps == static_cast<std::int64_t>(n_pulses) * model.pulse_period_ps);
  const double duration_s = static_cast<double>(run.duration_ps) * 1e-12;
  const double expect = det.dark_count_rate_hz * duration_s;
  for (const TagStream& s : run.streams) {
    const double got = static_cast<double>(s.timestamps.size());
    CHECK(std::abs(got - expect) < 5.0 * std::sqrt(expect));
    CHECK(is_sorted_tags(s.timestamps));
    REQUIRE_FALSE(s.timestamps.empty());
    CHECK(s.timestamps.front() >= 0);
    CHECK(s.timestamps.back() <= run.duration_ps);
  }
  // Independent channels: identical streams would indicate stream reuse.
  CHECK(run.streams[0].timestamps != run.streams[1].timestamps);
}

TEST_CASE("dead-time pruning keeps exactly the earliest of each cluster") {
  std::vector<std::int64_t> tags{0, 50, 120, 121, 300};
  prune_dead_time(tags, 100);
  CHECK(tags == std::vector<std::int64_t>{0, 120, 300});

  std::vector<std::int64_t> burst{10, 11, 12, 13};
  prune_dead_time(burst, 5);
  CHECK(burst == std::vector<std::int64_t>{10});

  std::vector<std::int64_t> untouched{10, 11, 12};
  prune_dead_time(untouched, 0);
  CHECK(untouched == std::vector<std::int64_t>{10, 11, 12});

  std::vector<std::int64_t> empty;
  prune_dead_time(empty, 100);
  CHECK(empty.empty());
}

TEST_CASE("dead time is enforced across block boundaries") {
  SourceModel model;
  model.eta_per_mw2 = 0.0;
  DetectorSpec det;
  det.dark_count_rate_hz = 2e6;  // dense enough to stress the carry
  det.dead_time_ps = 700'000;
  RunOptions opts;
  opts.block_pulses = 1u << 12;
  const RunResult run = simulate_run(model, {det, det}, 30.0, 100'000, 3, opts);
  const auto& t = run.streams[0].timestamps;
  REQUIRE(t.size() > 100);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] - t[i - 1] >= det.dead_time_ps);
}

TEST_CASE("zero pulses yield empty streams") {
  SourceModel model;
  const RunResult run = simulate_run(model, {DetectorSpec{}, DetectorSpec{}}, 30.0, 0, 1);
  CHECK(run.duration_ps == 0);
  for (const TagStream& s : run.streams) CHECK(s.timestamps.empty());
}

TEST_CASE("detection applies thinning and bounded jitter") {
  DetectorSpec det;
  det.quantum_efficiency = 0.3;
  det.jitter_fwhm_ps = 350.0;
  RngStream rng(13, 0, 0);
  std::vector<std::int64_t> out;
  const std::size_t n_photons = 400'000;
  const std::int64_t center = 1'000'000;
  const double max_abs = 500.0;
  for (std::size_t i = 0; i < n_photons; ++i) detect(1, center, det, rng, max_abs, out);

  const double kept = static_cast<double>(out.size());
  const double expect = det.quantum_efficiency * static_cast<double>(n_photons);
  CHECK(std::abs(kept - expect) < 5.0 * std::sqrt(expect * (1.0 - det.quantum_efficiency)));

  double sum = 0.0, sum2 = 0.0;
  for (std::int64_t t : out) {
    CHECK(std::abs(t - center) <= static_cast<std::int64_t>(max_abs));
    const double d = static_cast<double>(t - center);
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / kept;
  const double sigma = std::sqrt(sum2 / kept - mean * mean);
  CHECK(std::abs(mean) < 5.0 * 150.0 / std::sqrt(kept));
  // FWHM 350 ps -> sigma 148.6 ps; the +-500 ps clamp trims ~0.1% of mass.
  CHECK(sigma == doctest::Approx(350.0 / 2.3548).epsilon(0.01));
}

TEST_CASE("pair emission conserves photons between signal and idler arms") {
  SourceModel model;
  model.eta_per_mw2 = 2.0e-3;
  model.schmidt_lambdas = {0.9, 0.1};
  DetectorSpec ideal;
  ideal.quantum_efficiency = 1.0;
  ideal.dark_count_rate_hz = 0.0;
  ideal.jitter_fwhm_ps = 0.0;

  const RunResult two = simulate_run(model, {ideal, ideal}, 30.0, 500'000, 21);
  CHECK(two.streams[0].timestamps.size() == two.streams[1].timestamps.size());
  CHECK(two.streams[0].timestamps.size() > 500);

  const RunResult three = simulate_run(model, {ideal, ideal, ideal}, 30.0, 500'000, 21);
  CHECK(three.streams[0].timestamps.size() ==
        three.streams[1].timestamps.size() + three.streams[2].timestamps.size());
  // A 50/50 splitter routes close to half the idlers to each arm.
  const double n1 = static_cast<double>(three.streams[1].timestamps.size());
  const double n2 = static_cast<double>(three.streams[2].timestamps.size());
  CHECK(std::abs(n1 - n2) < 5.0 * std::sqrt(n1 + n2));
}

TEST_CASE("detected rate follows efficiency times pair mean") {
  SourceModel model;
  model.eta_per_mw2 = 2.6e-6;
  DetectorSpec det;
  det.quantum_efficiency = 0.5;
  det.path_transmission = 0.5;
  const double power = 30.0;
  const std::uint64_t n_pulses = 20'000'000;
  const RunResult run = simulate_run(model, {det, det}, power, n_pulses, 5, RunOptions{4});
  const double mu = pair_mean(model, power);
  const double expect = det.total_efficiency() * mu * static_cast<double>(n_pulses);
  for (const TagStream& s : run.streams) {
    const double got = static_cast<double>(s.timestamps.size());
    CHECK(std::abs(got - expect) < 5.0 * std::sqrt(expect));
  }
}

TEST_CASE("tag streams are identical for any thread count") {
  SourceModel model;
  model.eta_per_mw2 = 2.6e-6;
  model.raman_idler_per_mw = 1e-4;
  DetectorSpec det;
  det.dark_count_rate_hz = 1000.0;
  det.quantum_efficiency = 0.6;
  det.dead_time_ps = 1000;
  RunOptions one;
  one.threads = 1;
  one.block_pulses = 1u << 16;
  RunOptions four;
  four.threads = 4;
  four.block_pulses = 1u << 16;

  const RunResult a = simulate_run(model, {det, det, det}, 60.0, 3'000'000, 99, one);
  const RunResult b = simulate_run(model, {det, det, det}, 60.0, 3'000'000, 99, four);
  REQUIRE(a.streams.size() == b.streams.size());
  for (std::size_t c = 0; c < a.streams.size(); ++c) {
    CHECK(a.streams[c].timestamps == b.streams[c].timestamps);
    CHECK(is_sorted_tags(a.streams[c].timestamps));
  }
}

TEST_CASE("block source reproduces the materialized run") {
  SourceModel model;
  model.eta_per_mw2 = 2.6e-6;
  model.raman_signal_per_mw = 5e-5;
  DetectorSpec det;
  det.dark_count_rate_hz = 500.0;
  det.quantum_efficiency = 0.7;
  det.dead_time_ps = 2000;
  const std::vector<DetectorSpec> detectors{det, det};
  const std::uint64_t n_pulses = 2'000'000;
  const std::uint64_t block = 1u << 17;

  RunOptions opts;
  opts.block_pulses = block;
  const RunResult run = simulate_run(model, detectors, 100.0, n_pulses, 123, opts);

  BlockSource source(model, detectors, 100.0, n_pulses, 123, block);
  CHECK(source.duration_ps() == run.duration_ps);
  std::vector<std::vector<std::int64_t>> merged(detectors.size());
  std::vector<std::vector<std::int64_t>> chunk;
  while (source.next(chunk)) {
    REQUIRE(chunk.size() == detectors.size());
    for (std::size_t c = 0; c < chunk.size(); ++c) {
      CHECK(is_sorted_tags(chunk[c]));
      if (!merged[c].empty() && !chunk[c].empty()) CHECK(chunk[c].front() >= merged[c].back());
      merged[c].insert(merged[c].end(), chunk[c].begin(), chunk[c].end());
    }
  }
  for (std::size_t c = 0; c < merged.size(); ++c) {
    CHECK(merged[c] == run.streams[c].timestamps);
    REQUIRE(!merged[c].empty());
  }
}
