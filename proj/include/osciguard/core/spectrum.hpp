#pragma once

#include <cstddef>
#include <vector>

namespace osciguard {

/// Magnitude spectrum |X_k| of a real series, k = 0 .. n/2 (plain DFT;
/// series here are a few thousand points at most).
std::vector<double> dft_magnitude(const std::vector<double>& x);

/// Frequency of bin k for sample spacing dt.
double dft_bin_freq(std::size_t k, std::size_t n, double dt);

/// Index of the largest non-DC magnitude bin.
std::size_t dominant_bin(const std::vector<double>& mag);

/// Power (|X_k|^2) at the bin closest to freq_hz.
double power_at(const std::vector<double>& x, double dt, double freq_hz);

/// Largest minus smallest value.
double peak_to_peak(const std::vector<double>& x);

}  // namespace osciguard
