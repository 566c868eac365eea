#pragma once

#include <cstdint>

namespace fdst {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), hashed with the SplitMix64 finalizer. Streams are
/// split by hashing the parent key with a child index, so instance i of a
/// dataset always sees the same numbers regardless of thread scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child generator for a sub-stream (e.g. one dataset instance).
  CounterRng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fdst
