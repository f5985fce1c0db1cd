#include "osciguard/nn/train.hpp"

#include <algorithm>
#include <cmath>

#include "osciguard/core/errors.hpp"
#include "osciguard/nn/adam.hpp"

namespace osciguard::nn {

Tensor assemble_batch(const data::Dataset& ds, const std::vector<std::size_t>& idx,
                      const data::NormBounds& bounds) {
  Tensor x({static_cast<int>(idx.size()), kInputSteps, kInputFeatures});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& s = ds.samples.at(idx[b]);
    double* row = x.data() + static_cast<long long>(b) * kInputSteps * kInputFeatures;
    for (int t = 0; t < kInputSteps; ++t) {
      row[2 * t] = s.events[static_cast<std::size_t>(t)];
      row[2 * t + 1] = data::normalize_freq(s.freq_hz[static_cast<std::size_t>(t)], bounds);
    }
  }
  return x;
}

std::vector<double> batch_labels(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<double> y(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b)
    y[b] = static_cast<double>(ds.samples.at(idx[b]).label);
  return y;
}

double bce_with_logits(const Tensor& logits, const std::vector<double>& y, Tensor& dlogits) {
  const auto n = static_cast<std::size_t>(logits.numel());
  if (n != y.size()) throw UsageError("loss got mismatched logits and labels");
  dlogits = Tensor(logits.shape());
  constexpr double kClamp = 1e-7;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i];
    double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    p = std::clamp(p, kClamp, 1.0 - kClamp);
    loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    dlogits[i] = (p - y[i]) / static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

TrainResult train_network(Network& net, const data::Dataset& train_set, const TrainConfig& cfg) {
  if (train_set.samples.empty()) throw UsageError("training set is empty");
  const double lr = cfg.lr > 0.0 ? cfg.lr : net.spec().lr;
  const int batch = cfg.batch > 0 ? cfg.batch : net.spec().batch;
  const int epochs = cfg.epochs > 0 ? cfg.epochs : net.spec().epochs;

  net.set_mode(cfg.mode);
  Adam opt(lr);
  Rng shuffle_root(cfg.shuffle_seed);

  std::vector<std::size_t> order(train_set.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult out;
  for (int e = 0; e < epochs; ++e) {
    Rng r = shuffle_root.stream(static_cast<std::uint64_t>(e) + 1);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(r.uniform_int(0, static_cast<int>(i) - 1))]);

    double loss_sum = 0.0;
    long long seen = 0, correct = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch)) {
      const std::size_t hi = std::min(order.size(), at + static_cast<std::size_t>(batch));
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(at),
                                         order.begin() + static_cast<long>(hi));
      Tensor x = assemble_batch(train_set, idx, train_set.bounds);
      const std::vector<double> y = batch_labels(train_set, idx);

      net.zero_grad();
      Tensor logits = net.forward(x, true);
      Tensor dlogits;
      const double loss = bce_with_logits(logits, y, dlogits);
      if (!std::isfinite(loss))
        throw TrainingFault("loss is not finite", e + 1);
      net.backward(dlogits);
      opt.step(net.params());

      loss_sum += loss * static_cast<double>(idx.size());
      seen += static_cast<long long>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const bool hit = (logits[i] > 0.0) == (y[i] > 0.5);
        correct += hit ? 1 : 0;
      }
    }
    EpochStats st;
    st.epoch = e + 1;
    st.loss = loss_sum / static_cast<double>(seen);
    st.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    out.history.push_back(st);
  }
  return out;
}

std::vector<double> predict(Network& net, const data::Dataset& ds, int batch) {
  const int bs = batch > 0 ? batch : net.spec().batch;
  std::vector<double> probs;
  probs.reserve(ds.samples.size());
  for (std::size_t at = 0; at < ds.samples.size(); at += static_cast<std::size_t>(bs)) {
    const std::size_t hi = std::min(ds.samples.size(), at + static_cast<std::size_t>(bs));
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < hi; ++i) idx.push_back(i);
    Tensor x = assemble_batch(ds, idx, ds.bounds);
    Tensor logits = net.forward(x, false);
    for (long long i = 0; i < logits.numel(); ++i) {
      const double z = logits[static_cast<std::size_t>(i)];
      probs.push_back(z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                               : std::exp(z) / (1.0 + std::exp(z)));
    }
  }
  return probs;
}

}  // namespace osciguard::nn
