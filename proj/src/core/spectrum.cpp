#include "osciguard/core/spectrum.hpp"

#include <algorithm>
#include <cmath>

namespace osciguard {

std::vector<double> dft_magnitude(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1, 0.0);
  if (n == 0) return mag;
  const double w0 = 2.0 * M_PI / static_cast<double>(n);
  for (std::size_t k = 0; k < mag.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = w0 * static_cast<double>(k) * static_cast<double>(i);
      re += x[i] * std::cos(a);
      im -= x[i] * std::sin(a);
    }
    mag[k] = std::hypot(re, im);
  }
  return mag;
}

double dft_bin_freq(std::size_t k, std::size_t n, double dt) {
  return static_cast<double>(k) / (static_cast<double>(n) * dt);
}

std::size_t dominant_bin(const std::vector<double>& mag) {
  std::size_t best = 1;
  for (std::size_t k = 2; k < mag.size(); ++k)
    if (mag[k] > mag[best]) best = k;
  return mag.size() > 1 ? best : 0;
}

double power_at(const std::vector<double>& x, double dt, double freq_hz) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  const double kf = freq_hz * static_cast<double>(n) * dt;
  const std::size_t k = std::min<std::size_t>(n / 2, static_cast<std::size_t>(std::llround(kf)));
  double re = 0.0, im = 0.0;
  const double w0 = 2.0 * M_PI / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = w0 * static_cast<double>(k) * static_cast<double>(i);
    re += x[i] * std::cos(a);
    im -= x[i] * std::sin(a);
  }
  return re * re + im * im;
}

double peak_to_peak(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  return *mx - *mn;
}

}  // namespace osciguard
