#pragma once

#include <vector>

#include "osciguard/nn/layers.hpp"

namespace osciguard::nn {

/// Adam with bias correction. Moment buffers are positional, so the same
/// parameter list must be passed on every step.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params);

  long long t() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace osciguard::nn
