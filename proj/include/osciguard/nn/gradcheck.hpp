#pragma once

#include <string>
#include <vector>

#include "osciguard/nn/network.hpp"

namespace osciguard::nn {

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
  int n_checked = 0;
  int n_skipped = 0;  // entries rejected because the probe straddled a kink
};

struct GradCheckResult {
  std::vector<TensorCheck> tensors;
  double max_rel_err = 0.0;
  std::string worst;

  double max_for_prefix(const std::string& prefix) const;
};

/// Central-difference check of the analytic gradients on one batch. Checks up
/// to per_tensor entries of each parameter tensor (deterministic choice).
/// Dropout masks and running statistics are pinned for the duration.
GradCheckResult grad_check(Network& net, const Tensor& x, const std::vector<double>& y,
                           int per_tensor = 25, double eps = 1e-5,
                           std::uint64_t pick_seed = 99);

}  // namespace osciguard::nn
