#pragma once

#include <cstdint>
#include <vector>

#include "osciguard/data/dataset.hpp"
#include "osciguard/nn/network.hpp"

namespace osciguard::nn {

struct TrainConfig {
  std::uint64_t shuffle_seed = 7;
  ExecMode mode = ExecMode::Serial;
  /// Overrides; <= 0 means take the value from the network spec.
  double lr = 0.0;
  int batch = 0;
  int epochs = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // fraction of training windows scored correctly at 0.5
};

struct TrainResult {
  std::vector<EpochStats> history;
};

/// Assembles [n, 240, 2] inputs for the given sample indices: channel 0 event
/// codes, channel 1 frequency normalized with the supplied bounds.
Tensor assemble_batch(const data::Dataset& ds, const std::vector<std::size_t>& idx,
                      const data::NormBounds& bounds);
std::vector<double> batch_labels(const data::Dataset& ds, const std::vector<std::size_t>& idx);

/// Mean binary cross entropy of sigmoid(logits) against y, with the gradient
/// written to dlogits (the sigmoid is fused into the loss).
double bce_with_logits(const Tensor& logits, const std::vector<double>& y, Tensor& dlogits);

/// Mini-batch Adam over shuffled epochs. Throws TrainingFault when the loss
/// stops being finite.
TrainResult train_network(Network& net, const data::Dataset& train_set, const TrainConfig& cfg);

/// Detection probabilities for every sample, in dataset order.
std::vector<double> predict(Network& net, const data::Dataset& ds, int batch = 0);

}  // namespace osciguard::nn
