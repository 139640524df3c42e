#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vqa/common.hpp"

namespace vqa {

// Minimal dense row-major matrix; all model math runs on these.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(size_t(rows) * size_t(cols), T(0)) {}

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }

  static Matrix full(int rows, int cols, T v) {
    Matrix m(rows, cols);
    for (auto& x : m.data_) x = v;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& operator()(int i, int j) { return data_[size_t(i) * cols_ + j]; }
  const T& operator()(int i, int j) const { return data_[size_t(i) * cols_ + j]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(double(v))) return false;
    }
    return true;
  }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> m(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) m.data()[i] = U(data_[i]);
    return m;
  }

  Matrix row(int i) const {
    Matrix r(1, cols_);
    for (int j = 0; j < cols_; ++j) r(0, j) = (*this)(i, j);
    return r;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw numeric_error("matmul: inner dimensions differ");
  Matrix<T> out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

// a * b^T without materializing the transpose.
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) throw numeric_error("matmul_nt: inner dimensions differ");
  Matrix<T> out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      T s = T(0);
      for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

// a^T * b without materializing the transpose.
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) throw numeric_error("matmul_tn: inner dimensions differ");
  Matrix<T> out(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    for (int i = 0; i < a.cols(); ++i) {
      const T aki = a(k, i);
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

template <typename T>
void accumulate(Matrix<T>& into, const Matrix<T>& g) {
  if (!into.same_shape(g)) throw numeric_error("accumulate: shape mismatch");
  for (size_t i = 0; i < into.size(); ++i) into.data()[i] += g.data()[i];
}

}  // namespace vqa
