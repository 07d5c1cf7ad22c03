#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace qpay {

/// Seedable, splittable random source.
///
/// Draws come from a SplitMix64 sequence. Every generator also carries an
/// immutable key; `child(i)` derives an independent stream from the key and
/// the index alone, so per-position streams do not depend on how many values
/// the parent has already produced. This is what makes chunked or parallel
/// processing of a token reproducible.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next();
  result_type operator()() { return next(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  bool coin() { return (next() >> 63) != 0; }
  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound);

  Rng child(std::uint64_t index) const;
  Rng named(std::string_view label) const;

  std::uint64_t key() const { return key_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key);

  std::uint64_t key_;
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace qpay
