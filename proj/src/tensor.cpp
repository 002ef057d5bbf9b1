#include "futurelm/tensor.hpp"

#include <cmath>

#include "futurelm/errors.hpp"

namespace flm {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("tensor payload of " + std::to_string(values_.size()) +
                         " values does not fit shape [" + std::to_string(rows) + "x" +
                         std::to_string(cols) + "]");
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string());
  return values_[0];
}

void Tensor::fill(double v) {
  for (auto& x : values_) x = v;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw DimensionError("cannot add " + other.shape_string() + " into " + shape_string());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace flm
