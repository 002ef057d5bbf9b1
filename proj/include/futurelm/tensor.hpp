#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flm {

using MatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Dense row-major matrix of float64. Vectors are 1xN or Nx1, scalars 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(1, n, std::move(values));
  }
  static Tensor column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(n, 1, std::move(values));
  }
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  std::string shape_string() const;
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double item() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  MatrixMap mat() { return {values_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)}; }
  ConstMatrixMap mat() const {
    return {values_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace flm
