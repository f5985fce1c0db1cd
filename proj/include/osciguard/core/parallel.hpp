#pragma once

#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace osciguard {

/// Execution mode for the data-parallel kernels. Serial is the reference
/// implementation; Parallel runs the same chunk structure under OpenMP.
enum class ExecMode { Serial, Parallel };

/// Fixed chunk count for every data-parallel reduction. Work is split into
/// this many contiguous ranges regardless of thread count, and partial
/// results are combined in chunk order, so Serial and Parallel runs (and
/// runs under any OMP_NUM_THREADS) produce bit-identical doubles.
inline constexpr int kChunks = 16;

inline std::pair<int, int> chunk_bounds(int n, int chunk) {
  const long long lo = static_cast<long long>(n) * chunk / kChunks;
  const long long hi = static_cast<long long>(n) * (chunk + 1) / kChunks;
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

/// Runs fn(chunk, begin, end) over kChunks contiguous ranges of [0, n).
template <class F>
void parallel_chunks(int n, ExecMode mode, F&& fn) {
  if (n <= 0) return;
  if (mode == ExecMode::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int c = 0; c < kChunks; ++c) {
      const auto [lo, hi] = chunk_bounds(n, c);
      if (lo < hi) fn(c, lo, hi);
    }
    return;
#endif
  }
  for (int c = 0; c < kChunks; ++c) {
    const auto [lo, hi] = chunk_bounds(n, c);
    if (lo < hi) fn(c, lo, hi);
  }
}

/// Elementwise parallel loop (no reductions, so plain splitting is safe).
template <class F>
void parallel_elems(long long n, ExecMode mode, F&& fn) {
  if (n <= 0) return;
  if (mode == ExecMode::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) fn(i);
    return;
#endif
  }
  for (long long i = 0; i < n; ++i) fn(i);
}

}  // namespace osciguard
