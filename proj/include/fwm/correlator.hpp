#pragma once

// Streaming time-tag correlation.
//
// Three primitives, all with O(1)-per-tag streaming cores so runs never need
// the full tag record in memory:
//   - cross-correlation delay histogram (b - a), fixed bin width;
//   - peak/baseline decomposition of that histogram into coincidence,
//     accidental and uncorrelated-background estimates;
//   - greedy chronological coincidence matching (two- and three-channel),
//     where each tag participates in at most one coincidence and every tag
//     takes the earliest unused partner within the window.
//
// Matching windows are closed intervals [t - w, t + w]. Histogram bin b covers
// delays [b*width, (b+1)*width); a peak window at delay D owns the bins whose
// centers lie in [D - w, D + w).

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace fwm {

struct DelayHistogram {
  std::int64_t bin_width_ps = 1400;
  std::int64_t bins_per_side = 7143;     // range = bins_per_side * bin_width each side
  std::vector<std::uint64_t> counts;     // size 2 * bins_per_side, bin -bins_per_side first
  std::uint64_t n_a = 0;                 // tags consumed per input stream
  std::uint64_t n_b = 0;

  std::int64_t range_ps() const { return bins_per_side * bin_width_ps; }
  // b in [-bins_per_side, bins_per_side)
  std::uint64_t count_at(std::int64_t b) const {
    return counts[static_cast<std::size_t>(b + bins_per_side)];
  }
  double bin_center_ps(std::int64_t b) const {
    return (static_cast<double>(b) + 0.5) * static_cast<double>(bin_width_ps);
  }
};

// Incremental histogram builder. Feed chronological blocks of both streams
// together with a time bound meaning "all tags <= bound have been delivered";
// tags are buffered only within the histogram range of undecided partners.
class HistogramAccumulator {
 public:
  HistogramAccumulator(std::int64_t bin_width_ps, std::int64_t bins_per_side);

  void feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
            std::int64_t bound_ps);
  DelayHistogram finish();

 private:
  void process_ready(std::int64_t bound_ps);

  DelayHistogram hist_;
  std::deque<std::int64_t> a_buf_;
  std::deque<std::int64_t> b_buf_;
  std::int64_t last_a_;
  std::int64_t last_b_;
  std::int64_t bound_;
  bool finished_ = false;
};

DelayHistogram cross_histogram(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t bin_width_ps = 1400,
                               std::int64_t bins_per_side = 7143);

// Reference implementation: every (a, b) pair visited. Guarded against
// accidental use on large inputs; for validation only.
DelayHistogram brute_force_histogram(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b,
                                     std::int64_t bin_width_ps = 1400,
                                     std::int64_t bins_per_side = 7143);

struct PeakSummary {
  int k = 0;               // peak at delay k * pulse_period
  int window_bins = 0;     // bins whose centers fall in the peak window
  double raw = 0.0;        // integrated counts in the window
  double excess = 0.0;     // raw - window_bins * baseline_per_bin
};

struct HistogramDecomposition {
  double n_coinc = 0.0;        // zero-delay peak, baseline subtracted
  double n_acc = 0.0;          // mean baseline-subtracted side peak
  double n_acc_raw = 0.0;      // mean raw side peak (no baseline subtraction)
  double n_unco_per_bin = 0.0; // baseline: mean count of off-peak bins
  double zero_peak_raw = 0.0;
  int zero_window_bins = 0;
  std::uint64_t baseline_bins = 0;
  std::vector<PeakSummary> side_peaks;  // the peaks averaged into n_acc
};

// Splits a pulsed-source histogram into the zero-delay peak, the side peaks at
// multiples of the pulse period (up to max_side_peaks on each side), and the
// flat baseline between peaks. Throws if peak windows overlap or no complete
// side peak fits in the histogram range.
HistogramDecomposition decompose(const DelayHistogram& hist, std::int64_t pulse_period_ps,
                                 std::int64_t window_half_ps, int max_side_peaks = 10);

struct PairCounts {
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  std::uint64_t n_matched = 0;
};

class PairMatcher {
 public:
  explicit PairMatcher(std::int64_t window_half_ps);
  void feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
            std::int64_t bound_ps);
  PairCounts finish();

 private:
  void process_ready(std::int64_t bound_ps);

  std::int64_t window_;
  PairCounts counts_;
  std::deque<std::int64_t> a_buf_;
  std::deque<std::int64_t> b_buf_;
  std::int64_t last_a_;
  std::int64_t last_b_;
  std::int64_t bound_;
  bool finished_ = false;
};

PairCounts match_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       std::int64_t window_half_ps);

// Counts every (a, b) pair with |t_b - t_a| <= window, with no exclusivity:
// one tag can appear in many pairs. This is the estimator-grade coincidence
// count for correlation functions (its expectation is the true second-order
// moment), unlike greedy matching which caps each tag at one partner.
class WindowPairCounter {
 public:
  explicit WindowPairCounter(std::int64_t window_half_ps);
  void feed(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
            std::int64_t bound_ps);
  PairCounts finish();

 private:
  void process_ready(std::int64_t bound_ps);

  std::int64_t window_;
  PairCounts counts_;
  std::deque<std::int64_t> a_buf_;
  std::deque<std::int64_t> b_buf_;
  std::int64_t last_a_;
  std::int64_t last_b_;
  std::int64_t bound_;
  bool finished_ = false;
};

PairCounts count_window_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                              std::int64_t window_half_ps);

struct TripleCounts {
  std::uint64_t n_s = 0;
  std::uint64_t n_i1 = 0;
  std::uint64_t n_i2 = 0;
  std::uint64_t n_si1 = 0;     // s tags with an arm-1 partner (triples included)
  std::uint64_t n_si2 = 0;
  std::uint64_t n_triple = 0;  // s tags with partners on both arms
};

class TripleMatcher {
 public:
  explicit TripleMatcher(std::int64_t window_half_ps);
  void feed(std::span<const std::int64_t> s, std::span<const std::int64_t> i1,
            std::span<const std::int64_t> i2, std::int64_t bound_ps);
  TripleCounts finish();

 private:
  void process_ready(std::int64_t bound_ps);

  std::int64_t window_;
  TripleCounts counts_;
  std::deque<std::int64_t> s_buf_;
  std::deque<std::int64_t> i1_buf_;
  std::deque<std::int64_t> i2_buf_;
  std::int64_t last_s_;
  std::int64_t last_i1_;
  std::int64_t last_i2_;
  std::int64_t bound_;
  bool finished_ = false;
};

TripleCounts threefold(std::span<const std::int64_t> s, std::span<const std::int64_t> i1,
                       std::span<const std::int64_t> i2, std::int64_t window_half_ps);

}  // namespace fwm
