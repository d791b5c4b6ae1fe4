#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "shillab/errors.hpp"

namespace shillab::num {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense 2-D tensor of 64-bit reals, row-major. Scalars are 1x1, column
// vectors n x 1. Everything trainable in this project fits in two axes.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
  }

  // Column vector from values.
  static Tensor column(std::vector<double> v) {
    Tensor t;
    t.rows_ = v.size();
    t.cols_ = 1;
    t.data_ = std::move(v);
    return t;
  }

  static Tensor from_rows(std::size_t rows, std::size_t cols,
                          std::vector<double> v) {
    if (v.size() != rows * cols)
      throw ShapeError("Tensor::from_rows: value count " +
                       std::to_string(v.size()) + " != " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_ = std::move(v);
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Scalar access; contract-checked.
  double item() const {
    if (size() != 1)
      throw ContractError("Tensor::item on non-scalar tensor " + shape_str());
    return data_[0];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Eigen::Map<EigenRowMajor> map() {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }
  Eigen::Map<const EigenRowMajor> map() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Fixed-coefficient sparse matrix in CSR form. Coefficients never carry
// gradients; they encode graph structure (normalized adjacency).
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // size rows+1
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;

  static SparseMatrix from_triplets(
      std::size_t rows, std::size_t cols,
      const std::vector<std::tuple<std::size_t, std::size_t, double>>& trip);
};

}  // namespace shillab::num
