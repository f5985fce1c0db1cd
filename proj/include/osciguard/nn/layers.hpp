#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "osciguard/core/parallel.hpp"
#include "osciguard/core/rng.hpp"
#include "osciguard/nn/tensor.hpp"

namespace osciguard::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

struct LayerContext {
  ExecMode mode = ExecMode::Serial;
  bool training = false;
  /// Gradient checking re-evaluates the loss many times; frozen mode pins the
  /// dropout masks and stops running-statistic updates so those evaluations
  /// see one fixed function.
  bool frozen = false;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string type() const = 0;
  virtual Tensor forward(const Tensor& x, const LayerContext& ctx) = 0;
  virtual Tensor backward(const Tensor& dy, const LayerContext& ctx) = 0;
  virtual std::vector<Param*> params() { return {}; }
  /// Non-trainable persistent state that belongs in checkpoints.
  virtual std::vector<Param*> state() { return {}; }

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

 protected:
  std::string name_;
};

/// y = x.W + b on the last axis; leading axes are treated as rows, which is
/// what a per-timestep (time-distributed) dense layer needs.
class Dense : public Layer {
 public:
  Dense(int in_features, int out_features, Rng init);
  std::string type() const override { return "dense"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  std::vector<Param*> params() override { return {&w_, &b_}; }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Param w_, b_;
  Tensor x_;  // cached input
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double alpha = 0.01) : alpha_(alpha) {}
  std::string type() const override { return "leaky_relu"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  Tensor x_;
};

/// Normalizes the last axis. Training uses batch statistics and refreshes the
/// running estimates; inference uses the running estimates.
class BatchNorm : public Layer {
 public:
  BatchNorm(int features, double eps = 1e-9, double momentum = 0.99);
  std::string type() const override { return "batch_norm"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param*> state() override { return {&run_mean_, &run_var_}; }
  double eps() const { return eps_; }

 private:
  int f_;
  double eps_, momentum_;
  Param gamma_, beta_;
  Param run_mean_, run_var_;
  Tensor xhat_;
  std::vector<double> inv_std_, mean_;
  long long rows_ = 0;
  bool train_path_ = false;
};

/// Inverted dropout with counter-based masks: the mask for call k depends
/// only on (seed, k), so a rerun of the same training schedule reproduces
/// every mask.
class Dropout : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);
  std::string type() const override { return "dropout"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  double rate() const { return rate_; }

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  Tensor mask_;
  bool masked_ = false;  // whether the last forward applied a mask
};

class Flatten : public Layer {
 public:
  std::string type() const override { return "flatten"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;

 private:
  std::vector<int> in_shape_;
};

/// Reinterprets each row's trailing axes (row-major, no data movement).
class Reshape : public Layer {
 public:
  explicit Reshape(std::vector<int> inner) : inner_(std::move(inner)) {}
  std::string type() const override { return "reshape"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;

 private:
  std::vector<int> inner_;
  std::vector<int> in_shape_;
};

/// Standard LSTM over [batch, time, features]; gate order i,f,g,o with the
/// forget-gate bias initialized to one.
class Lstm : public Layer {
 public:
  Lstm(int in_features, int units, bool return_sequences, Rng init);
  std::string type() const override { return "lstm"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  std::vector<Param*> params() override { return {&wx_, &wh_, &b_}; }
  int units() const { return units_; }

 private:
  int in_, units_;
  bool seq_;
  Param wx_, wh_, b_;
  // caches for backprop through time
  Tensor x_, gates_, c_, tanhc_, h_;
};

/// Convolutional LSTM over [batch, time, height, width, channels]; gates are
/// same-padded convolutions of the input and the previous hidden state.
class ConvLstm2d : public Layer {
 public:
  ConvLstm2d(int in_channels, int filters, int kernel, bool return_sequences, Rng init);
  std::string type() const override { return "conv_lstm"; }
  Tensor forward(const Tensor& x, const LayerContext& ctx) override;
  Tensor backward(const Tensor& dy, const LayerContext& ctx) override;
  std::vector<Param*> params() override { return {&wx_, &wh_, &b_}; }
  int filters() const { return filters_; }
  int kernel() const { return kernel_; }

 private:
  int cin_, filters_, kernel_;
  bool seq_;
  Param wx_, wh_, b_;
  Tensor x_, gates_, c_, tanhc_, h_;
};

/// Truncated-normal initializer used for every weight tensor.
void init_truncated_normal(Tensor& t, Rng& rng, double stddev = 0.05);

}  // namespace osciguard::nn
