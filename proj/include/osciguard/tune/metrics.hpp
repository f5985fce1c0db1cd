#pragma once

#include <cstdint>
#include <vector>

#include "osciguard/data/dataset.hpp"
#include "osciguard/nn/network.hpp"

namespace osciguard::tune {

struct Confusion {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

Confusion confusion_at(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels,
                       double threshold = 0.5);

// All in percent. Undefined ratios (empty denominators) come back as zero.
double accuracy_pct(const Confusion& c);
double precision_pct(const Confusion& c);
double recall_pct(const Confusion& c);
double f_measure_pct(const Confusion& c);

struct EvalResult {
  Confusion confusion;
  std::vector<double> probs;  // dataset order
};

EvalResult evaluate(nn::Network& net, const data::Dataset& ds, double threshold = 0.5,
                    int batch = 0);

}  // namespace osciguard::tune
