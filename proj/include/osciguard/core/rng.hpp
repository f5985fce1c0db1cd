#pragma once

#include <cstdint>
#include <random>

namespace osciguard {

/// Derives decorrelated child seeds from a parent seed and a tag.
/// SplitMix64 finalizer; stable across platforms and standard libraries.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

/// Seeded random stream. Distribution sampling is implemented on top of
/// the raw mt19937_64 output so that draws are bit-identical everywhere,
/// which lets tests freeze golden values.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  /// Independent child stream; derived from the original seed, not from
  /// engine state, so stream layout does not depend on draw order.
  Rng stream(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return eng_(); }

  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double uniform_right_open0(double hi);   // (0, hi]
  int uniform_int(int lo, int hi);         // {lo, ..., hi}
  double normal(double mean, double stddev);
  double truncated_normal(double mean, double stddev, double lo, double hi);
  double exponential(double rate);

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace osciguard
