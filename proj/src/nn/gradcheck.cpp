#include "osciguard/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "osciguard/core/rng.hpp"
#include "osciguard/nn/train.hpp"

namespace osciguard::nn {

double GradCheckResult::max_for_prefix(const std::string& prefix) const {
  double m = 0.0;
  for (const auto& t : tensors)
    if (t.name.rfind(prefix, 0) == 0) m = std::max(m, t.max_rel_err);
  return m;
}

GradCheckResult grad_check(Network& net, const Tensor& x, const std::vector<double>& y,
                           int per_tensor, double eps, std::uint64_t pick_seed) {
  net.set_frozen(true);

  // Prime the dropout masks once, then every evaluation below sees the same
  // stochastic function.
  auto loss_at = [&]() {
    Tensor logits = net.forward(x, true);
    Tensor dl;
    return bce_with_logits(logits, y, dl);
  };

  net.zero_grad();
  Tensor logits = net.forward(x, true);
  Tensor dlogits;
  bce_with_logits(logits, y, dlogits);
  net.backward(dlogits);
  const double l0 = loss_at();

  GradCheckResult res;
  Rng pick(pick_seed);
  for (Param* p : net.params()) {
    TensorCheck tc;
    tc.name = p->name;
    const long long n = p->value.numel();
    const bool exhaustive = n <= per_tensor;
    const long long budget = exhaustive ? n : 8LL * per_tensor;
    long long cursor = 0;
    for (long long a = 0; a < budget && tc.n_checked < per_tensor; ++a) {
      const long long i =
          exhaustive ? cursor++
                     : static_cast<long long>(pick.uniform_int(0, static_cast<int>(n) - 1));
      const double saved = p->value[static_cast<std::size_t>(i)];
      p->value[static_cast<std::size_t>(i)] = saved + eps;
      const double lp = loss_at();
      p->value[static_cast<std::size_t>(i)] = saved - eps;
      const double lm = loss_at();
      p->value[static_cast<std::size_t>(i)] = saved;
      // When the two one-sided slopes disagree the probe interval brackets a
      // slope discontinuity: the leaky-relu kink, where dropout can park whole
      // rows when a zero bias makes the pre-activation exactly zero. A central
      // difference there estimates no derivative (the analytic value is a
      // one-sided subgradient), so the entry is skipped and redrawn. Smooth
      // curvature also separates the slopes, but only in proportion to eps,
      // which keeps it well under this threshold.
      const double gp = (lp - l0) / eps;
      const double gm = (l0 - lm) / eps;
      if (std::abs(gp - gm) > 1.5e-4 * std::max(1e-3, std::abs(gp) + std::abs(gm))) {
        ++tc.n_skipped;
        continue;
      }
      const double gn = (lp - lm) / (2.0 * eps);
      const double ga = p->grad[static_cast<std::size_t>(i)];
      // the denominator floor keeps finite-difference cancellation noise on
      // near-zero gradients from registering as error
      const double rel = std::abs(ga - gn) / std::max(1e-3, std::abs(ga) + std::abs(gn));
      tc.max_rel_err = std::max(tc.max_rel_err, rel);
      ++tc.n_checked;
    }
    if (tc.max_rel_err >= res.max_rel_err) {
      res.max_rel_err = tc.max_rel_err;
      res.worst = tc.name;
    }
    res.tensors.push_back(tc);
  }

  net.set_frozen(false);
  return res;
}

}  // namespace osciguard::nn
