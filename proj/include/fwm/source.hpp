#pragma once

// Monte-Carlo time-tag source for a pulsed photon-pair experiment.
//
// Per pulse, each Schmidt mode k draws a thermal (Bose-Einstein) pair number
// with mean lambda_k * mu, mu = eta * P^2; optional Raman noise photons are
// Poisson with mean b * P per channel. Detection applies efficiency thinning,
// Gaussian timing jitter, dark counts as a homogeneous Poisson process over the
// record, and chronological dead-time pruning.
//
// Pulses are generated in fixed-size index blocks; every block derives its own
// RNG streams from (seed, stream, block), so runs are bit-identical for any
// thread count. Empty pulses are never instantiated: pulse occupancy per mode
// is sampled by geometric skips, which makes runs of 1e11+ pulses cheap at
// small mu.

#include <cstdint>
#include <vector>

#include "fwm/rng.hpp"

namespace fwm {

struct DetectorSpec {
  double quantum_efficiency = 1.0;
  double path_transmission = 1.0;    // all optical losses from fiber to detector
  double dark_count_rate_hz = 0.0;
  double jitter_fwhm_ps = 350.0;
  std::int64_t dead_time_ps = 0;

  double total_efficiency() const { return quantum_efficiency * path_transmission; }
};

struct SourceModel {
  double eta_per_mw2 = 2.6e-6;             // pairs / pulse / mW^2
  std::vector<double> schmidt_lambdas{1.0};  // relative mode weights (normalized on use)
  double raman_signal_per_mw = 0.0;        // Raman photons / pulse / mW in the signal band
  double raman_idler_per_mw = 0.0;
  std::int64_t pulse_period_ps = 500000;   // 2 MHz repetition rate
  // When true, the per-pulse pair number is Poisson(mu) instead of per-mode
  // thermal: same means, no photon-number bunching. Faster and adequate
  // whenever the pair-number variance is not under study.
  bool poisson_pairs = false;
};

// Mean pairs per pulse at average power P (mW): mu = eta * P^2.
double pair_mean(const SourceModel& model, double power_mw);

// One unconditional pulse draw; used for distribution tests.
struct PulseDraw {
  std::vector<std::uint32_t> pairs_per_mode;
  std::uint32_t raman_signal = 0;
  std::uint32_t raman_idler = 0;
};
PulseDraw draw_pulse(const SourceModel& model, double power_mw, RngStream& rng);

// Detection of `photon_count` photons emitted at `pulse_center_ps`: efficiency
// thinning then Gaussian jitter (FWHM from the detector settings). Jitter
// samples are clamped to +-max_abs_jitter_ps when that bound is positive.
// Appends kept timestamps to `out` (unsorted).
void detect(std::size_t photon_count, std::int64_t pulse_center_ps, const DetectorSpec& detector,
            RngStream& rng, double max_abs_jitter_ps, std::vector<std::int64_t>& out);

// Chronological dead-time pruning: of any tags closer than dead_time_ps,
// exactly the earliest survives. No-op for dead_time_ps <= 0.
void prune_dead_time(std::vector<std::int64_t>& tags, std::int64_t dead_time_ps);

struct TagStream {
  std::uint8_t channel_id = 0;           // 0 = signal, 1 = idler (arm 1), 2 = idler arm 2
  std::vector<std::int64_t> timestamps;  // picoseconds, non-decreasing
};

struct RunOptions {
  int threads = 1;
  std::uint64_t block_pulses = 1u << 20;
};

struct RunResult {
  std::vector<TagStream> streams;  // one per detector, channel_id = index
  std::uint64_t n_pulses = 0;
  std::int64_t duration_ps = 0;    // n_pulses * pulse_period
  double power_mw = 0.0;
  std::uint64_t seed = 0;
};

// Full run with materialized tag streams. `detectors` holds 2 entries
// (signal, idler) or 3 (signal + the two output arms of a 50/50 idler
// beamsplitter; each idler photon is routed to one arm before thinning).
// Pulse j is centered at (j + 1/2) * period, so tags stay within
// [0, duration]. n_pulses = 0 yields empty streams.
RunResult simulate_run(const SourceModel& model, const std::vector<DetectorSpec>& detectors,
                       double power_mw, std::uint64_t n_pulses, std::uint64_t seed,
                       const RunOptions& options = {});

// Streaming variant for runs too large to materialize: emits per-channel
// sorted tag blocks in chronological order (dead time already applied).
class BlockSource {
 public:
  BlockSource(const SourceModel& model, std::vector<DetectorSpec> detectors, double power_mw,
              std::uint64_t n_pulses, std::uint64_t seed, std::uint64_t block_pulses = 1u << 20);

  // Fills one block (out[channel] = tags); returns false when exhausted.
  bool next(std::vector<std::vector<std::int64_t>>& out);

  std::int64_t duration_ps() const;

 private:
  SourceModel model_;
  std::vector<DetectorSpec> detectors_;
  double power_mw_;
  std::uint64_t n_pulses_;
  std::uint64_t seed_;
  std::uint64_t block_pulses_;
  std::uint64_t next_block_ = 0;
  std::vector<std::int64_t> last_kept_;  // dead-time carry per channel
};

}  // namespace fwm
