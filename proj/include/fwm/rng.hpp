#pragma once

// Deterministic counter-seeded RNG used by the time-tag simulator.
//
// Every (seed, stream_id, block_index) triple derives an independent xoshiro256**
// stream, so pulse blocks can be generated on any number of threads and still
// produce bit-identical tag streams: the stream a block consumes depends only on
// its index, never on scheduling. All samplers are hand-rolled (no
// std::*_distribution) so sequences are pinned by this file, not by the standard
// library implementation.

#include <cmath>
#include <cstdint>
#include <limits>

namespace fwm {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class RngStream {
 public:
  // stream_id separates purposes (per Schmidt mode, Raman, dark counts, ...);
  // block_index separates pulse blocks of one purpose.
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t block_index) {
    std::uint64_t x = seed;
    std::uint64_t h = detail::splitmix64(x);
    x = h ^ (0xd1342543de82ef95ULL * (stream_id + 1));
    h = detail::splitmix64(x);
    x = h ^ (0xaf251af3b0f025b5ULL * (block_index + 1));
    for (auto& w : s_) w = detail::splitmix64(x);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // xoshiro forbids all-zero
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1] - safe as a logarithm argument.
  double uniform01_open_low() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    // Lemire-style rejection-free-enough multiply-shift with widening; the tiny
    // modulo bias at n ~ 2^64 is irrelevant here (n is a duration in ps).
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Number of failures before the first success at success probability q;
  // used to skip runs of empty pulses. Returns UINT64_MAX for q <= 0.
  std::uint64_t geometric_failures(double q) {
    if (q <= 0.0) return std::numeric_limits<std::uint64_t>::max();
    if (q >= 1.0) return 0;
    const double g = std::log(uniform01_open_low()) / std::log1p(-q);
    if (g >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

  // Exact Poisson sampling: Knuth's product method for small means, Hormann's
  // PTRS transformed rejection for large ones.
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      std::uint64_t n = 0;
      double prod = uniform01_open_low();
      while (prod > limit) {
        ++n;
        prod *= uniform01_open_low();
      }
      return n;
    }
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      const double u = uniform01() - 0.5;
      const double v = uniform01_open_low();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double k = kf;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          k * log_mean - mean - std::lgamma(k + 1.0)) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace fwm
