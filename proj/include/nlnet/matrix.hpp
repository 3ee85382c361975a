#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace nlnet {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C = A * B^T  (A: n x k, B: m x k, C: n x m).
Matrix multiply_transposed(const Matrix& a, const Matrix& b);

/// C = A * B  (A: n x k, B: k x m).
Matrix multiply(const Matrix& a, const Matrix& b);

/// C = A^T * B  (A: k x n, B: k x m, C: n x m). Accumulates over k in order.
Matrix transposed_multiply(const Matrix& a, const Matrix& b);

}  // namespace nlnet
