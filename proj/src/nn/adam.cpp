#include "osciguard/nn/adam.hpp"

#include <cmath>

#include "osciguard/core/errors.hpp"

namespace osciguard::nn {

void Adam::step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(static_cast<std::size_t>(params[i]->value.numel()), 0.0);
      v_[i].assign(static_cast<std::size_t>(params[i]->value.numel()), 0.0);
    }
  }
  if (m_.size() != params.size()) throw UsageError("optimizer was built for a different network");

  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (static_cast<long long>(m_[i].size()) != p.value.numel())
      throw UsageError("optimizer state does not match parameter shape");
    for (std::size_t k = 0; k < m_[i].size(); ++k) {
      const double g = p.grad[k];
      m_[i][k] = b1_ * m_[i][k] + (1.0 - b1_) * g;
      v_[i][k] = b2_ * v_[i][k] + (1.0 - b2_) * g * g;
      const double mhat = m_[i][k] / c1;
      const double vhat = v_[i][k] / c2;
      p.value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace osciguard::nn
