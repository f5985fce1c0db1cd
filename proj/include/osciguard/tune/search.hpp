#pragma once

#include <string>
#include <vector>

#include "osciguard/core/rng.hpp"
#include "osciguard/nn/train.hpp"
#include "osciguard/tune/metrics.hpp"

namespace osciguard::tune {

/// Hyperparameter ranges; the learning rate is sampled log-uniformly, the
/// rest uniformly.
struct SearchSpace {
  double lr_lo = 1e-4, lr_hi = 2e-2;
  double dropout_lo = 0.1, dropout_hi = 0.5;
  int batch_lo = 16, batch_hi = 64;
  int units_lo = 16, units_hi = 200;
  int epochs_lo = 4, epochs_hi = 8;
  int filters_lo = 2, filters_hi = 8;
  int kernel_lo = 3, kernel_hi = 7;
};

nn::NetworkSpec sample_spec(const std::string& family, const SearchSpace& space, Rng& r);

struct TrialResult {
  int index = 0;
  nn::NetworkSpec spec;
  Confusion val;
  double f_pct = 0.0;
  nn::TrainResult train;
};

/// Sorts by F-measure descending; ties prefer fewer missed attacks, then the
/// earlier trial.
void rank_trials(std::vector<TrialResult>& trials);

std::vector<TrialResult> random_search(const std::string& family, const data::Dataset& train,
                                       const data::Dataset& val, int n_trials,
                                       std::uint64_t seed, ExecMode mode,
                                       const SearchSpace& space = {});

/// Local jitter (about 10% relative) around an incumbent; the incumbent is
/// re-run as trial zero so refinement can never lose it.
std::vector<TrialResult> refine_search(const nn::NetworkSpec& incumbent,
                                       const data::Dataset& train, const data::Dataset& val,
                                       int n_trials, std::uint64_t seed, ExecMode mode,
                                       const SearchSpace& space = {});

struct ProbeResult {
  Confusion confusion;
  double recall_pct = 0.0;
  double fp_rate_pct = 0.0;  // false alarms among normal windows
};

/// Scores a detector on windows that end shortly after the attack begins.
ProbeResult early_detection_probe(nn::Network& net, const data::Dataset& probe_set,
                                  double threshold = 0.5);

}  // namespace osciguard::tune
