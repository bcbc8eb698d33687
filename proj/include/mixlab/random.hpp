#pragma once

#include "mixlab/types.hpp"

#include <cstdint>
#include <limits>

namespace mixlab {

/// Counter-based SplitMix64 generator.
///
/// The n-th output of stream s under seed k is mix64(key(k, s) + (n + 1) * gamma),
/// where mix64 is the SplitMix64 finalizer and gamma = 0x9E3779B97F4A7C15. Because
/// each output depends only on (seed, stream, counter), independent streams can be
/// carved out of a single seed without any shared state, and any position can be
/// reached in O(1) with discard().
///
/// Satisfies std::uniform_random_bit_generator, so it plugs into <random>
/// distributions. Outputs of those distributions are deterministic per standard
/// library implementation only.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix64(seed ^ mix64(stream + kGamma))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  void discard(std::uint64_t n) noexcept { counter_ += n; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// A new generator keyed by this one's key and `stream`; does not advance this one.
  CounterRng fork(std::uint64_t stream) const noexcept {
    CounterRng child(0);
    child.key_ = mix64(key_ ^ mix64(stream + 0x632BE59BD9B4E019ULL));
    return child;
  }

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// rows x cols matrix of i.i.d. N(0, stddev^2) entries.
Matrix gaussian_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);
Vector gaussian_vector(CounterRng& rng, Eigen::Index size, double stddev = 1.0);
/// Entries uniform on [lo, hi).
Matrix uniform_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi);
Vector uniform_vector(CounterRng& rng, Eigen::Index size, double lo, double hi);

}  // namespace mixlab
