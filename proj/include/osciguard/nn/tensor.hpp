#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace osciguard::nn {

/// Dense row-major tensor of doubles. Small and deliberately boring: layers
/// index raw storage directly, so this only tracks shape and owns memory.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  long long numel() const { return static_cast<long long>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  void fill(double v);
  void reshape(std::vector<int> shape);  // element count must not change

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

long long shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace osciguard::nn
