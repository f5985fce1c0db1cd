#include "osciguard/core/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace osciguard {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  // SplitMix64 finalizer applied to seed xor a spread-out tag.
  std::uint64_t z = seed ^ (tag * 0x9E3779B97F4A7C15ull);
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::uniform_right_open0(double hi) {
  // (0, hi]: flip the half-open side of uniform()
  return hi * (1.0 - uniform());
}

int Rng::uniform_int(int lo, int hi) {
  // Rejection-free would bias for huge spans; spans here are tiny.
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
  const std::uint64_t limit = ~0ull - (~0ull % span);
  std::uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return lo + static_cast<int>(x % span);
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // Box-Muller on explicitly constructed uniforms.
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return mean + stddev * (r * std::cos(a));
}

double Rng::truncated_normal(double mean, double stddev, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncated_normal: empty support");
  for (int i = 0; i < 100000; ++i) {
    const double x = normal(mean, stddev);
    if (x >= lo && x <= hi) return x;
  }
  throw std::runtime_error("truncated_normal: rejection sampling did not converge");
}

double Rng::exponential(double rate) {
  if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be positive");
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return -std::log(u) / rate;
}

}  // namespace osciguard
