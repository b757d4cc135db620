#include "fwm/correlator.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fwm {
namespace {

constexpr std::int64_t kNoBound = std::numeric_limits<std::int64_t>::min();

std::int64_t floor_div(std::int64_t x, std::int64_t w) {
  std::int64_t q = x / w;
  return q * w == x ? q : q - (x < 0);
}

std::int64_t ceil_div(std::int64_t x, std::int64_t w) {
  std::int64_t q = x / w;
  return q * w == x ? q : q + (x > 0);
}

// Streaming-feed contract shared by all accumulators: blocks are sorted,
// never overlap an already-completed bound, and fit under the new bound.
void check_block(std::span<const std::int64_t> block, std::int64_t& last_seen,
                 std::int64_t old_bound, std::int64_t new_bound, const char* name) {
  for (std::size_t i = 1; i < block.size(); ++i)
    if (block[i] < block[i - 1])
      throw std::invalid_argument(std::string(name) + " tags are not sorted");
  if (block.empty()) return;
  if (block.front() < last_seen)
    throw std::invalid_argument(std::string(name) + " tags go backwards across feeds");
  if (old_bound != kNoBound && block.front() <= old_bound)
    throw std::invalid_argument(std::string(name) + " tags arrive at or before a completed bound");
  if (block.back() > new_bound)
    throw std::invalid_argument(std::string(name) + " tags exceed the feed bound");
  last_seen = block.back();
}

void check_bound(std::int64_t old_bound, std::int64_t new_bound) {
  if (old_bound != kNoBound && new_bound < old_bound)
    throw std::invalid_argument("feed bound decreased");
}

}  // namespace

HistogramAccumulator::HistogramAccumulator(std::int64_t bin_width_ps, std::int64_t bins_per_side)
    : last_a_(kNoBound), last_b_(kNoBound), bound_(kNoBound) {
  if (bin_width_ps <= 0) throw std::invalid_argument("bin_width_ps must be > 0");
  if (bins_per_side <= 0) throw std::invalid_argument("bins_per_side must be > 0");
  hist_.bin_width_ps = bin_width_ps;
  hist_.bins_per_side = bins_per_side;
  hist_.counts.assign(static_cast<std::size_t>(2 * bins_per_side), 0);
}

void HistogramAccumulator::feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                                std::int64_t bound_ps) {
  if (finished_) throw std::logic_error("feed after finish");
  check_bound(bound_, bound_ps);
  check_block(a, last_a_, bound_, bound_ps, "stream a");
  check_block(b, last_b_, bound_, bound_ps, "stream b");
  a_buf_.insert(a_buf_.end(), a.begin(), a.end());
  b_buf_.insert(b_buf_.end(), b.begin(), b.end());
  hist_.n_a += a.size();
  hist_.n_b += b.size();
  bound_ = bound_ps;
  process_ready(bound_);
}

void HistogramAccumulator::process_ready(std::int64_t bound_ps) {
  const std::int64_t range = hist_.range_ps();
  while (!a_buf_.empty() &&
         (finished_ || (bound_ps != kNoBound && a_buf_.front() + range <= bound_ps))) {
    const std::int64_t t_a = a_buf_.front();
    a_buf_.pop_front();
    while (!b_buf_.empty() && b_buf_.front() < t_a - range) b_buf_.pop_front();
    for (std::int64_t t_b : b_buf_) {
      if (t_b >= t_a + range) break;
      ++hist_.counts[static_cast<std::size_t>(floor_div(t_b - t_a, hist_.bin_width_ps) +
                                              hist_.bins_per_side)];
    }
  }
  if (a_buf_.empty() && bound_ps != kNoBound) {
    // Future a tags are strictly beyond the bound; drop b tags out of reach.
    while (!b_buf_.empty() && b_buf_.front() < bound_ps - range) b_buf_.pop_front();
  }
}

DelayHistogram HistogramAccumulator::finish() {
  if (finished_) throw std::logic_error("finish called twice");
  finished_ = true;
  process_ready(bound_);
  a_buf_.clear();
  b_buf_.clear();
  return std::move(hist_);
}

DelayHistogram cross_histogram(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t bin_width_ps, std::int64_t bins_per_side) {
  HistogramAccumulator acc(bin_width_ps, bins_per_side);
  std::int64_t bound = std::numeric_limits<std::int64_t>::max();
  acc.feed(a, b, bound);
  return acc.finish();
}

DelayHistogram brute_force_histogram(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b,
                                     std::int64_t bin_width_ps, std::int64_t bins_per_side) {
  if (bin_width_ps <= 0) throw std::invalid_argument("bin_width_ps must be > 0");
  if (bins_per_side <= 0) throw std::invalid_argument("bins_per_side must be > 0");
  const double pair_count = static_cast<double>(a.size()) * static_cast<double>(b.size());
  if (pair_count > 1e8)
    throw std::invalid_argument("brute_force_histogram refused: input too large");
  DelayHistogram hist;
  hist.bin_width_ps = bin_width_ps;
  hist.bins_per_side = bins_per_side;
  hist.counts.assign(static_cast<std::size_t>(2 * bins_per_side), 0);
  hist.n_a = a.size();
  hist.n_b = b.size();
  const std::int64_t range = hist.range_ps();
  for (std::int64_t t_a : a)
    for (std::int64_t t_b : b) {
      const std::int64_t d = t_b - t_a;
      if (d < -range || d >= range) continue;
      ++hist.counts[static_cast<std::size_t>(floor_div(d, bin_width_ps) + bins_per_side)];
    }
  return hist;
}

HistogramDecomposition decompose(const DelayHistogram& hist, std::int64_t pulse_period_ps,
                                 std::int64_t window_half_ps, int max_side_peaks) {
  if (pulse_period_ps <= 0) throw std::invalid_argument("pulse_period_ps must be > 0");
  if (window_half_ps <= 0) throw std::invalid_argument("window_half_ps must be > 0");
  if (2 * window_half_ps > pulse_period_ps)
    throw std::invalid_argument("peak windows overlap: 2 * window_half_ps > pulse period");
  if (max_side_peaks < 1) throw std::invalid_argument("max_side_peaks must be >= 1");
  if (hist.counts.size() != static_cast<std::size_t>(2 * hist.bins_per_side))
    throw std::invalid_argument("histogram counts size mismatch");

  const std::int64_t w = hist.bin_width_ps;
  const std::int64_t range = hist.range_ps();
  const std::int64_t k_full = (range - window_half_ps) / pulse_period_ps;
  if (k_full < 1)
    throw std::invalid_argument("histogram range holds no complete side peak");

  // Bins whose centers fall inside the window of peak k (clipped to range).
  auto window_bins = [&](std::int64_t k) {
    const std::int64_t d = k * pulse_period_ps;
    std::int64_t lo = ceil_div(2 * (d - window_half_ps) - w, 2 * w);
    std::int64_t hi = ceil_div(2 * (d + window_half_ps) - w, 2 * w) - 1;
    lo = std::max(lo, -hist.bins_per_side);
    hi = std::min(hi, hist.bins_per_side - 1);
    return std::pair<std::int64_t, std::int64_t>(lo, hi);
  };

  // Mark every bin belonging to any peak window, including partially clipped
  // peaks at the edges, so the baseline only sees genuinely off-peak bins.
  std::vector<char> in_peak(hist.counts.size(), 0);
  const std::int64_t k_edge = (range + window_half_ps) / pulse_period_ps + 1;
  for (std::int64_t k = -k_edge; k <= k_edge; ++k) {
    const auto [lo, hi] = window_bins(k);
    for (std::int64_t b = lo; b <= hi; ++b)
      in_peak[static_cast<std::size_t>(b + hist.bins_per_side)] = 1;
  }

  double baseline_sum = 0.0;
  std::uint64_t baseline_bins = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    if (in_peak[i]) continue;
    baseline_sum += static_cast<double>(hist.counts[i]);
    ++baseline_bins;
  }
  if (baseline_bins == 0)
    throw std::invalid_argument("no baseline bins between peaks");
  const double baseline = baseline_sum / static_cast<double>(baseline_bins);

  auto integrate = [&](std::int64_t k, PeakSummary& peak) {
    const auto [lo, hi] = window_bins(k);
    peak.k = static_cast<int>(k);
    peak.window_bins = static_cast<int>(hi - lo + 1);
    peak.raw = 0.0;
    for (std::int64_t b = lo; b <= hi; ++b) peak.raw += static_cast<double>(hist.count_at(b));
    peak.excess = peak.raw - static_cast<double>(peak.window_bins) * baseline;
  };

  HistogramDecomposition out;
  out.n_unco_per_bin = baseline;
  out.baseline_bins = baseline_bins;
  PeakSummary zero;
  integrate(0, zero);
  out.zero_peak_raw = zero.raw;
  out.zero_window_bins = zero.window_bins;
  out.n_coinc = zero.excess;

  const std::int64_t n_side = std::min<std::int64_t>(max_side_peaks, k_full);
  double acc_sum = 0.0;
  double acc_raw_sum = 0.0;
  for (std::int64_t k = -n_side; k <= n_side; ++k) {
    if (k == 0) continue;
    PeakSummary peak;
    integrate(k, peak);
    acc_sum += peak.excess;
    acc_raw_sum += peak.raw;
    out.side_peaks.push_back(peak);
  }
  const double n_peaks = static_cast<double>(out.side_peaks.size());
  out.n_acc = acc_sum / n_peaks;
  out.n_acc_raw = acc_raw_sum / n_peaks;
  return out;
}

PairMatcher::PairMatcher(std::int64_t window_half_ps)
    : window_(window_half_ps), last_a_(kNoBound), last_b_(kNoBound), bound_(kNoBound) {
  if (window_half_ps <= 0) throw std::invalid_argument("window_half_ps must be > 0");
}

void PairMatcher::feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       std::int64_t bound_ps) {
  if (finished_) throw std::logic_error("feed after finish");
  check_bound(bound_, bound_ps);
  check_block(a, last_a_, bound_, bound_ps, "stream a");
  check_block(b, last_b_, bound_, bound_ps, "stream b");
  a_buf_.insert(a_buf_.end(), a.begin(), a.end());
  b_buf_.insert(b_buf_.end(), b.begin(), b.end());
  counts_.n_a += a.size();
  counts_.n_b += b.size();
  bound_ = bound_ps;
  process_ready(bound_);
}

void PairMatcher::process_ready(std::int64_t bound_ps) {
  while (!a_buf_.empty() &&
         (finished_ || (bound_ps != kNoBound && a_buf_.front() + window_ <= bound_ps))) {
    const std::int64_t t = a_buf_.front();
    a_buf_.pop_front();
    while (!b_buf_.empty() && b_buf_.front() < t - window_) b_buf_.pop_front();
    if (!b_buf_.empty() && b_buf_.front() <= t + window_) {
      b_buf_.pop_front();
      ++counts_.n_matched;
    }
  }
  if (a_buf_.empty() && bound_ps != kNoBound)
    while (!b_buf_.empty() && b_buf_.front() < bound_ps - window_) b_buf_.pop_front();
}

PairCounts PairMatcher::finish() {
  if (finished_) throw std::logic_error("finish called twice");
  finished_ = true;
  process_ready(bound_);
  a_buf_.clear();
  b_buf_.clear();
  return counts_;
}

PairCounts match_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       std::int64_t window_half_ps) {
  PairMatcher matcher(window_half_ps);
  matcher.feed(a, b, std::numeric_limits<std::int64_t>::max());
  return matcher.finish();
}

WindowPairCounter::WindowPairCounter(std::int64_t window_half_ps)
    : window_(window_half_ps), last_a_(kNoBound), last_b_(kNoBound), bound_(kNoBound) {
  if (window_half_ps <= 0) throw std::invalid_argument("window_half_ps must be > 0");
}

void WindowPairCounter::feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                             std::int64_t bound_ps) {
  if (finished_) throw std::logic_error("feed after finish");
  check_bound(bound_, bound_ps);
  check_block(a, last_a_, bound_, bound_ps, "stream a");
  check_block(b, last_b_, bound_, bound_ps, "stream b");
  a_buf_.insert(a_buf_.end(), a.begin(), a.end());
  b_buf_.insert(b_buf_.end(), b.begin(), b.end());
  counts_.n_a += a.size();
  counts_.n_b += b.size();
  bound_ = bound_ps;
  process_ready(bound_);
}

void WindowPairCounter::process_ready(std::int64_t bound_ps) {
  while (!a_buf_.empty() &&
         (finished_ || (bound_ps != kNoBound && a_buf_.front() + window_ <= bound_ps))) {
    const std::int64_t t = a_buf_.front();
    a_buf_.pop_front();
    while (!b_buf_.empty() && b_buf_.front() < t - window_) b_buf_.pop_front();
    for (std::int64_t t_b : b_buf_) {
      if (t_b > t + window_) break;
      ++counts_.n_matched;
    }
  }
  if (a_buf_.empty() && bound_ps != kNoBound)
    while (!b_buf_.empty() && b_buf_.front() < bound_ps - window_) b_buf_.pop_front();
}

PairCounts WindowPairCounter::finish() {
  if (finished_) throw std::logic_error("finish called twice");
  finished_ = true;
  process_ready(bound_);
  a_buf_.clear();
  b_buf_.clear();
  return counts_;
}

PairCounts count_window_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                              std::int64_t window_half_ps) {
  WindowPairCounter counter(window_half_ps);
  counter.feed(a, b, std::numeric_limits<std::int64_t>::max());
  return counter.finish();
}

TripleMatcher::TripleMatcher(std::int64_t window_half_ps)
    : window_(window_half_ps),
      last_s_(kNoBound),
      last_i1_(kNoBound),
      last_i2_(kNoBound),
      bound_(kNoBound) {
  if (window_half_ps <= 0) throw std::invalid_argument("window_half_ps must be > 0");
}

void TripleMatcher::feed(std::span<const std::int64_t> s, std::span<const std::int64_t> i1,
                         std::span<const std::int64_t> i2, std::int64_t bound_ps) {
  if (finished_) throw std::logic_error("feed after finish");
  check_bound(bound_, bound_ps);
  check_block(s, last_s_, bound_, bound_ps, "herald stream");
  check_block(i1, last_i1_, bound_, bound_ps, "arm-1 stream");
  check_block(i2, last_i2_, bound_, bound_ps, "arm-2 stream");
  s_buf_.insert(s_buf_.end(), s.begin(), s.end());
  i1_buf_.insert(i1_buf_.end(), i1.begin(), i1.end());
  i2_buf_.insert(i2_buf_.end(), i2.begin(), i2.end());
  counts_.n_s += s.size();
  counts_.n_i1 += i1.size();
  counts_.n_i2 += i2.size();
  bound_ = bound_ps;
  process_ready(bound_);
}

void TripleMatcher::process_ready(std::int64_t bound_ps) {
  auto try_match = [this](std::deque<std::int64_t>& buf, std::int64_t t) {
    while (!buf.empty() && buf.front() < t - window_) buf.pop_front();
    if (!buf.empty() && buf.front() <= t + window_) {
      buf.pop_front();
      return true;
    }
    return false;
  };
  while (!s_buf_.empty() &&
         (finished_ || (bound_ps != kNoBound && s_buf_.front() + window_ <= bound_ps))) {
    const std::int64_t t = s_buf_.front();
    s_buf_.pop_front();
    const bool m1 = try_match(i1_buf_, t);
    const bool m2 = try_match(i2_buf_, t);
    counts_.n_si1 += m1;
    counts_.n_si2 += m2;
    counts_.n_triple += m1 && m2;
  }
  if (s_buf_.empty() && bound_ps != kNoBound) {
    while (!i1_buf_.empty() && i1_buf_.front() < bound_ps - window_) i1_buf_.pop_front();
    while (!i2_buf_.empty() && i2_buf_.front() < bound_ps - window_) i2_buf_.pop_front();
  }
}

TripleCounts TripleMatcher::finish() {
  if (finished_) throw std::logic_error("finish called twice");
  finished_ = true;
  process_ready(bound_);
  s_buf_.clear();
  i1_buf_.clear();
  i2_buf_.clear();
  return counts_;
}

TripleCounts threefold(std::span<const std::int64_t> s, std::span<const std::int64_t> i1,
                       std::span<const std::int64_t> i2, std::int64_t window_half_ps) {
  TripleMatcher matcher(window_half_ps);
  matcher.feed(s, i1, i2, std::numeric_limits<std::int64_t>::max());
  return matcher.finish();
}

}  // namespace fwm
