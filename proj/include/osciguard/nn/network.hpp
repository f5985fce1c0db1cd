#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "osciguard/nn/layers.hpp"

namespace osciguard::nn {

/// Everything needed to rebuild a detector: family plus the sampled
/// hyperparameters. The convolutional family ignores units1/units3 (its
/// middle dense layer uses units2), mirroring the shared search space.
struct NetworkSpec {
  std::string family = "lstm";  // "lstm" or "convlstm"
  int units1 = 64;
  int units2 = 32;
  int units3 = 16;
  int filters1 = 4;
  int filters2 = 4;
  int kernel1 = 3;
  int kernel2 = 3;
  double dropout = 0.2;
  double lr = 1e-3;
  int batch = 32;
  int epochs = 5;
  std::uint64_t init_seed = 1;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

/// Input windows are [batch, 240, 2]: event codes and normalized frequency.
inline constexpr int kInputSteps = 240;
inline constexpr int kInputFeatures = 2;
/// The convolutional family folds a window into frames of 20 consecutive
/// ticks, each a 20x2 single-channel image.
inline constexpr int kFrameCount = 12;
inline constexpr int kFrameHeight = 20;

class Network {
 public:
  explicit Network(const NetworkSpec& spec);

  Tensor forward(const Tensor& x, bool training);
  /// dlogits is the loss gradient at the final dense output [batch, 1].
  void backward(const Tensor& dlogits);

  std::vector<Param*> params();
  std::vector<Param*> state();
  void zero_grad();
  long long n_params();

  const NetworkSpec& spec() const { return spec_; }
  ExecMode mode() const { return ctx_.mode; }
  void set_mode(ExecMode m) { ctx_.mode = m; }
  /// Pins dropout masks and running statistics; see LayerContext.
  void set_frozen(bool f) { ctx_.frozen = f; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  void validate_input(const Tensor& x) const;

  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  LayerContext ctx_;
};

}  // namespace osciguard::nn
