#include "fwm/source.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <thread>

namespace fwm {
namespace {

// RNG stream ids: Schmidt mode k uses stream k; the noise processes get fixed
// slots well above any realistic mode count.
constexpr std::uint64_t kRamanSignalStream = 32;
constexpr std::uint64_t kRamanIdlerStream = 33;
constexpr std::uint64_t kDarkStreamBase = 64;

constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))

constexpr std::int64_t kNoTagYet = std::numeric_limits<std::int64_t>::min();

std::vector<double> normalized_lambdas(const SourceModel& model) {
  if (model.schmidt_lambdas.empty()) throw std::invalid_argument("schmidt_lambdas is empty");
  double sum = 0.0;
  for (double lam : model.schmidt_lambdas) {
    if (!(lam >= 0.0)) throw std::invalid_argument("schmidt_lambdas must be non-negative");
    sum += lam;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("schmidt_lambdas sum to zero");
  std::vector<double> out(model.schmidt_lambdas);
  for (double& lam : out) lam /= sum;
  return out;
}

void validate_run_inputs(const SourceModel& model, const std::vector<DetectorSpec>& detectors,
                         double power_mw) {
  if (!(model.eta_per_mw2 >= 0.0)) throw std::invalid_argument("eta_per_mw2 must be >= 0");
  if (model.pulse_period_ps <= 0) throw std::invalid_argument("pulse_period_ps must be > 0");
  if (!(power_mw >= 0.0)) throw std::invalid_argument("power_mw must be >= 0");
  if (detectors.size() != 2 && detectors.size() != 3)
    throw std::invalid_argument("need 2 detectors (signal, idler) or 3 (signal + two idler arms)");
  for (const DetectorSpec& d : detectors) {
    if (d.quantum_efficiency < 0.0 || d.quantum_efficiency > 1.0 || d.path_transmission < 0.0 ||
        d.path_transmission > 1.0)
      throw std::invalid_argument("detector efficiencies must lie in [0, 1]");
    if (d.dark_count_rate_hz < 0.0) throw std::invalid_argument("dark_count_rate_hz must be >= 0");
    if (!(d.jitter_fwhm_ps >= 0.0)) throw std::invalid_argument("jitter_fwhm_ps must be >= 0");
  }
}

// Appends one detected photon (or none) for a photon hitting `det` at
// `center_ps`. Jitter is clamped to +-max_jitter_ps so tags never leave their
// pulse period, which keeps block outputs chronological.
inline void detect_one(std::int64_t center_ps, const DetectorSpec& det, double sigma_ps,
                       double max_jitter_ps, RngStream& rng, std::vector<std::int64_t>& out) {
  if (rng.uniform01() >= det.total_efficiency()) return;
  double delta = rng.normal() * sigma_ps;
  if (max_jitter_ps > 0.0) delta = std::clamp(delta, -max_jitter_ps, max_jitter_ps);
  out.push_back(center_ps + static_cast<std::int64_t>(std::llround(delta)));
}

// Generates every tag of one pulse block. `out[channel]` receives sorted tags.
// Lambdas must already be normalized. Deterministic in (seed, block_index).
void generate_block(const SourceModel& model, const std::vector<double>& lambdas,
                    const std::vector<DetectorSpec>& detectors, double power_mw,
                    std::uint64_t seed, std::uint64_t block_index, std::uint64_t block_pulses,
                    std::uint64_t n_pulses_total, std::vector<std::vector<std::int64_t>>& out) {
  const std::size_t n_ch = detectors.size();
  const bool split_idler = n_ch == 3;
  out.assign(n_ch, {});

  const std::int64_t period = model.pulse_period_ps;
  const std::uint64_t first_pulse = block_index * block_pulses;
  const std::uint64_t count =
      std::min<std::uint64_t>(block_pulses, n_pulses_total - first_pulse);
  if (count == 0) return;
  const std::int64_t block_t0 = static_cast<std::int64_t>(first_pulse) * period;
  const double max_jitter = 0.5 * static_cast<double>(period);

  std::vector<double> sigma(n_ch);
  for (std::size_t c = 0; c < n_ch; ++c) sigma[c] = detectors[c].jitter_fwhm_ps * kFwhmToSigma;

  const double mu = pair_mean(model, power_mw);

  auto pulse_center = [&](std::uint64_t local_pulse) {
    return block_t0 + static_cast<std::int64_t>(local_pulse) * period + period / 2;
  };

  auto emit_pair = [&](std::int64_t center, RngStream& rng) {
    detect_one(center, detectors[0], sigma[0], max_jitter, rng, out[0]);
    const std::size_t idler_ch = split_idler ? 1 + rng.uniform_below(2) : 1;
    detect_one(center, detectors[idler_ch], sigma[idler_ch], max_jitter, rng, out[idler_ch]);
  };

  // Pair generation, one mode at a time. In the default thermal model only
  // occupied pulses are visited: the gap to the next occupied pulse is
  // geometric with the occupancy probability m/(1+m), and the occupied-pulse
  // pair number is 1 + Geometric(1/(1+m)), which together reproduce
  // Bose-Einstein statistics. With poisson_pairs the per-pulse count is
  // Poisson(m) instead, sampled as a block total with uniform pulse placement.
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const double m = lambdas[k] * mu;
    if (!(m > 0.0)) continue;
    RngStream rng(seed, static_cast<std::uint64_t>(k), block_index);
    if (model.poisson_pairs) {
      const std::uint64_t total = rng.poisson(m * static_cast<double>(count));
      for (std::uint64_t j = 0; j < total; ++j)
        emit_pair(pulse_center(rng.uniform_below(count)), rng);
      continue;
    }
    const double occupancy = m / (1.0 + m);
    const double conditional_success = 1.0 / (1.0 + m);
    std::uint64_t pos = rng.geometric_failures(occupancy);
    while (pos < count) {
      const std::uint64_t n_pairs = 1 + rng.geometric_failures(conditional_success);
      const std::int64_t center = pulse_center(pos);
      for (std::uint64_t j = 0; j < n_pairs; ++j) emit_pair(center, rng);
      const std::uint64_t skip = rng.geometric_failures(occupancy);
      if (skip > count - 1 - pos) break;  // avoids overflow near the block end
      pos += 1 + skip;
    }
  }

  // Raman photons are Poisson per pulse, so the block total is Poisson and
  // each photon lands on an independently uniform pulse.
  auto raman_channel = [&](double mean_per_pulse, bool idler_band, std::uint64_t stream_id) {
    if (!(mean_per_pulse > 0.0)) return;
    RngStream rng(seed, stream_id, block_index);
    const std::uint64_t total = rng.poisson(mean_per_pulse * static_cast<double>(count));
    for (std::uint64_t j = 0; j < total; ++j) {
      const std::int64_t center = pulse_center(rng.uniform_below(count));
      std::size_t ch = 0;
      if (idler_band) ch = split_idler ? 1 + rng.uniform_below(2) : 1;
      detect_one(center, detectors[ch], sigma[ch], max_jitter, rng, out[ch]);
    }
  };
  raman_channel(model.raman_signal_per_mw * power_mw, false, kRamanSignalStream);
  raman_channel(model.raman_idler_per_mw * power_mw, true, kRamanIdlerStream);

  // Dark counts: homogeneous Poisson process over the block's time span.
  const std::int64_t span = static_cast<std::int64_t>(count) * period;
  for (std::size_t c = 0; c < n_ch; ++c) {
    const double rate = detectors[c].dark_count_rate_hz;
    if (!(rate > 0.0)) continue;
    RngStream rng(seed, kDarkStreamBase + c, block_index);
    const std::uint64_t n_dark = rng.poisson(rate * static_cast<double>(span) * 1e-12);
    for (std::uint64_t j = 0; j < n_dark; ++j)
      out[c].push_back(block_t0 +
                       static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(span))));
  }

  for (auto& channel : out) std::sort(channel.begin(), channel.end());
}

void prune_dead_time_carry(std::vector<std::int64_t>& tags, std::int64_t dead_time_ps,
                           std::int64_t& last_kept) {
  if (dead_time_ps <= 0) {
    if (!tags.empty()) last_kept = tags.back();
    return;
  }
  std::size_t w = 0;
  for (std::size_t r = 0; r < tags.size(); ++r) {
    if (last_kept != kNoTagYet && tags[r] - last_kept < dead_time_ps) continue;
    last_kept = tags[r];
    tags[w++] = tags[r];
  }
  tags.resize(w);
}

}  // namespace

double pair_mean(const SourceModel& model, double power_mw) {
  return model.eta_per_mw2 * power_mw * power_mw;
}

PulseDraw draw_pulse(const SourceModel& model, double power_mw, RngStream& rng) {
  const std::vector<double> lambdas = normalized_lambdas(model);
  const double mu = pair_mean(model, power_mw);
  PulseDraw draw;
  draw.pairs_per_mode.resize(lambdas.size(), 0);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const double m = lambdas[k] * mu;
    if (!(m > 0.0)) continue;
    // Unconditional Bose-Einstein pair number: Geometric(1/(1+m)) failures.
    // The Poisson variant keeps the same mean without the thermal tail.
    const std::uint64_t n =
        model.poisson_pairs ? rng.poisson(m) : rng.geometric_failures(1.0 / (1.0 + m));
    draw.pairs_per_mode[k] = static_cast<std::uint32_t>(std::min<std::uint64_t>(n, 0xffffffffu));
  }
  const double ms = model.raman_signal_per_mw * power_mw;
  const double mi = model.raman_idler_per_mw * power_mw;
  if (ms > 0.0) draw.raman_signal = static_cast<std::uint32_t>(rng.poisson(ms));
  if (mi > 0.0) draw.raman_idler = static_cast<std::uint32_t>(rng.poisson(mi));
  return draw;
}

void detect(std::size_t photon_count, std::int64_t pulse_center_ps, const DetectorSpec& detector,
            RngStream& rng, double max_abs_jitter_ps, std::vector<std::int64_t>& out) {
  const double sigma = detector.jitter_fwhm_ps * kFwhmToSigma;
  for (std::size_t j = 0; j < photon_count; ++j)
    detect_one(pulse_center_ps, detector, sigma, max_abs_jitter_ps, rng, out);
}

void prune_dead_time(std::vector<std::int64_t>& tags, std::int64_t dead_time_ps) {
  std::int64_t last = kNoTagYet;
  prune_dead_time_carry(tags, dead_time_ps, last);
}

RunResult simulate_run(const SourceModel& model, const std::vector<DetectorSpec>& detectors,
                       double power_mw, std::uint64_t n_pulses, std::uint64_t seed,
                       const RunOptions& options) {
  validate_run_inputs(model, detectors, power_mw);
  if (options.block_pulses == 0) throw std::invalid_argument("block_pulses must be > 0");
  const std::vector<double> lambdas = normalized_lambdas(model);

  const std::uint64_t n_blocks =
      n_pulses == 0 ? 0 : (n_pulses + options.block_pulses - 1) / options.block_pulses;
  std::vector<std::vector<std::vector<std::int64_t>>> per_block(n_blocks);

  auto work = [&](std::atomic<std::uint64_t>& cursor) {
    for (std::uint64_t b = cursor.fetch_add(1); b < n_blocks; b = cursor.fetch_add(1))
      generate_block(model, lambdas, detectors, power_mw, seed, b, options.block_pulses, n_pulses,
                     per_block[b]);
  };
  std::atomic<std::uint64_t> cursor{0};
  const unsigned n_threads = static_cast<unsigned>(std::clamp<std::uint64_t>(
      options.threads > 0 ? static_cast<std::uint64_t>(options.threads) : 1, 1,
      std::max<std::uint64_t>(n_blocks, 1)));
  if (n_threads <= 1) {
    work(cursor);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back([&] { work(cursor); });
    for (auto& th : pool) th.join();
  }

  RunResult result;
  result.n_pulses = n_pulses;
  result.duration_ps = static_cast<std::int64_t>(n_pulses) * model.pulse_period_ps;
  result.power_mw = power_mw;
  result.seed = seed;
  result.streams.resize(detectors.size());
  for (std::size_t c = 0; c < detectors.size(); ++c) {
    TagStream& stream = result.streams[c];
    stream.channel_id = static_cast<std::uint8_t>(c);
    std::size_t total = 0;
    for (const auto& block : per_block) total += block[c].size();
    stream.timestamps.reserve(total);
    for (auto& block : per_block) {
      stream.timestamps.insert(stream.timestamps.end(), block[c].begin(), block[c].end());
      block[c].clear();
      block[c].shrink_to_fit();
    }
    prune_dead_time(stream.timestamps, detectors[c].dead_time_ps);
  }
  return result;
}

BlockSource::BlockSource(const SourceModel& model, std::vector<DetectorSpec> detectors,
                         double power_mw, std::uint64_t n_pulses, std::uint64_t seed,
                         std::uint64_t block_pulses)
    : model_(model),
      detectors_(std::move(detectors)),
      power_mw_(power_mw),
      n_pulses_(n_pulses),
      seed_(seed),
      block_pulses_(block_pulses) {
  validate_run_inputs(model_, detectors_, power_mw_);
  if (block_pulses_ == 0) throw std::invalid_argument("block_pulses must be > 0");
  model_.schmidt_lambdas = normalized_lambdas(model_);
  last_kept_.assign(detectors_.size(), kNoTagYet);
}

bool BlockSource::next(std::vector<std::vector<std::int64_t>>& out) {
  const std::uint64_t first_pulse = next_block_ * block_pulses_;
  if (first_pulse >= n_pulses_ || n_pulses_ == 0) return false;
  generate_block(model_, model_.schmidt_lambdas, detectors_, power_mw_, seed_, next_block_,
                 block_pulses_, n_pulses_, out);
  for (std::size_t c = 0; c < out.size(); ++c)
    prune_dead_time_carry(out[c], detectors_[c].dead_time_ps, last_kept_[c]);
  ++next_block_;
  return true;
}

std::int64_t BlockSource::duration_ps() const {
  return static_cast<std::int64_t>(n_pulses_) * model_.pulse_period_ps;
}

}  // namespace fwm
