// Dense double-precision matrix, row-major. The universal carrier for
// weights, Jacobians and feature batches.
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/rng.hpp"

namespace rankscope {

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(check_dims(rows, cols), fill) {}
  Matrix(int rows, int cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != check_dims(rows, cols))
      throw input_error("matrix data length does not match rows*cols");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_finite(const char* who) const {
    if (!finite()) throw input_error(std::string(who) + ": non-finite matrix entry");
  }

 private:
  static std::size_t check_dims(int rows, int cols) {
    if (rows <= 0 || cols <= 0) throw input_error("matrix dimensions must be positive");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline Matrix identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

inline Matrix diagonal(const std::vector<double>& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (int i = 0; i < m.rows(); ++i) m(i, i) = d[static_cast<std::size_t>(i)];
  return m;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// C = A * B, accumulated in the k-inner order so the inner loop is stride-1
// over both B's row and C's row.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw input_error("multiply: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) { return multiply(a, b); }

inline Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw input_error("add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

inline std::vector<double> multiply_vec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols() != static_cast<int>(x.size())) throw input_error("multiply_vec: shape mismatch");
  std::vector<double> y(static_cast<std::size_t>(a.rows()), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline Matrix gaussian_matrix(int rows, int cols, GaussianStream& g) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g.next();
  return m;
}

inline std::vector<double> gaussian_vector(int n, GaussianStream& g) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = g.next();
  return v;
}

}  // namespace rankscope
