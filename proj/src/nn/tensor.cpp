#include "osciguard/nn/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "osciguard/core/errors.hpp"

namespace osciguard::nn {

long long shape_numel(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw UsageError("tensor dims must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= ndim()) throw UsageError("tensor dim index out of range");
  return shape_[static_cast<std::size_t>(i)];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::vector<int> shape) {
  if (shape_numel(shape) != numel())
    throw UsageError("reshape changes element count: " + shape_str(shape_) + " -> " +
                     shape_str(shape));
  shape_ = std::move(shape);
}

}  // namespace osciguard::nn
