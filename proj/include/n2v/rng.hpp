#pragma once

#include <cstdint>
#include <limits>

namespace n2v {

/// Counter-based pseudo-random generator keyed by (seed, stream).
///
/// Draw k of a generator is a pure function of its key and k, so results are
/// identical across runs and platforms. `split` derives an independent child
/// stream, which lets parallel workers draw deterministically without sharing
/// state. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child generator for `stream`; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  result_type operator()();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal draw (Box-Muller, spare value cached).
  double normal();
  /// Poisson draw with mean `lambda` >= 0. Exact for every lambda.
  std::uint64_t poisson(double lambda);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace n2v
