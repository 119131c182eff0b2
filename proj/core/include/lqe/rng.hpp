#pragma once

#include <cstdint>
#include <limits>

namespace lqe {

/// Counter-based, splittable random stream.
///
/// Each draw hashes (key, counter) with the SplitMix64 finalizer, so a stream
/// is fully described by two integers and child streams derived with
/// `split(i)` are independent of the order in which workers consume them.
/// Satisfies std::uniform_random_bit_generator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept;

  /// Child stream keyed by (this key, stream id). Does not advance this stream.
  Rng split(std::uint64_t stream) const noexcept;

  double uniform() noexcept;                       // [0, 1)
  double uniform(double lo, double hi) noexcept;   // [lo, hi)
  int uniform_int(int lo, int hi) noexcept;        // inclusive bounds
  bool bernoulli(double p) noexcept;
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  double gamma(double shape);
  /// Beta(a, b) via two Gamma draws.
  double beta(double a, double b);
  /// Truncated normal restricted to mean +/- 2 stddev.
  double truncated_normal(double stddev) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lqe
