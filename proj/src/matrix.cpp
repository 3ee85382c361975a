#include "nlnet/matrix.hpp"

#include <stdexcept>

namespace nlnet {

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("multiply_transposed: inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.values().data() + i * k;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.values().data() + j * k;
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t t = 0; t < a.cols(); ++t) {
      const double av = a(i, t);
      if (av == 0.0) continue;
      const auto bt = b.row(t);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += av * bt[j];
    }
  }
  return c;
}

Matrix transposed_multiply(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("transposed_multiply: row count mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    const auto at = a.row(t);
    const auto bt = b.row(t);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double av = at[i];
      if (av == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += av * bt[j];
    }
  }
  return c;
}

}  // namespace nlnet
