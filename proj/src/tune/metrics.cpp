#include "osciguard/tune/metrics.hpp"

#include "osciguard/core/errors.hpp"
#include "osciguard/nn/train.hpp"

namespace osciguard::tune {

Confusion confusion_at(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels,
                       double threshold) {
  if (probs.size() != labels.size())
    throw UsageError("confusion needs one probability per label");
  Confusion c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool hit = probs[i] > threshold;
    if (labels[i]) {
      if (hit) ++c.tp; else ++c.fn;
    } else {
      if (hit) ++c.fp; else ++c.tn;
    }
  }
  return c;
}

double accuracy_pct(const Confusion& c) {
  const long long n = c.total();
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

double precision_pct(const Confusion& c) {
  const long long d = c.tp + c.fp;
  return d == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(d);
}

double recall_pct(const Confusion& c) {
  const long long d = c.tp + c.fn;
  return d == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(d);
}

double f_measure_pct(const Confusion& c) {
  const double p = precision_pct(c);
  const double r = recall_pct(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EvalResult evaluate(nn::Network& net, const data::Dataset& ds, double threshold, int batch) {
  EvalResult res;
  res.probs = nn::predict(net, ds, batch);
  std::vector<std::uint8_t> labels;
  labels.reserve(ds.samples.size());
  for (const auto& s : ds.samples) labels.push_back(s.label);
  res.confusion = confusion_at(res.probs, labels, threshold);
  return res;
}

}  // namespace osciguard::tune
