// Copyright 2026 The Strata Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "strata/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace strata {
namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

[[noreturn]] void shape_mismatch(const char* op, std::size_t ar, std::size_t ac,
                                 std::size_t br, std::size_t bc) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(ar, ac) +
                   " and " + shape_str(br, bc));
}

}  // namespace

template <Real T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
  data_.assign(rows * cols, T{0});
}

template <Real T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
  if (data_.size() != rows * cols)
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + shape_str(rows, cols));
}

template <Real T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  if (rows_ == 0 || cols_ == 0) throw ShapeError("matrix dimensions must be positive");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <Real T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <Real T>
void Matrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <Real T>
Vector<T>::Vector(std::size_t len) : data_(len, T{0}) {
  if (len == 0) throw ShapeError("vector length must be positive");
}

template <Real T>
Vector<T>::Vector(std::vector<T> data) : data_(std::move(data)) {
  if (data_.empty()) throw ShapeError("vector length must be positive");
}

template <Real T>
Vector<T> Vector<T>::basis(std::size_t len, std::size_t index) {
  Vector v(len);
  if (index >= len) throw ShapeError("basis index out of range");
  v[index] = T{1};
  return v;
}

template <Real T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.empty() || b.empty() || a.cols() != b.rows())
    shape_mismatch("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix<T> c(n, m);
  // i-k-j keeps the innermost loop streaming over contiguous rows of b and c.
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = c.row(i).data();
    const T* arow = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = arow[k];
      const T* brow = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <Real T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.empty() || b.empty() || a.cols() != b.cols())
    shape_mismatch("matmul_nt", a.rows(), a.cols(), b.cols(), b.rows());
  const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
  Matrix<T> c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a.row(i).data();
    T* crow = c.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const T* brow = b.row(j).data();
      T acc{0};
      for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

template <Real T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.empty() || b.empty() || a.rows() != b.rows())
    shape_mismatch("matmul_tn", a.cols(), a.rows(), b.rows(), b.cols());
  const std::size_t inner = a.rows(), n = a.cols(), m = b.cols();
  Matrix<T> c(n, m);
  // Outer-product accumulation, k outermost: element (i, j) is summed in k
  // order, the same order reconstruct() uses for sufficient factors.
  for (std::size_t k = 0; k < inner; ++k) {
    const T* arow = a.row(k).data();
    const T* brow = b.row(k).data();
    for (std::size_t i = 0; i < n; ++i) {
      const T aki = arow[i];
      T* crow = c.row(i).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

template <Real T>
Matrix<T> outer(std::span<const T> u, std::span<const T> v) {
  if (u.empty() || v.empty()) throw ShapeError("outer: empty operand");
  Matrix<T> c(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    T* crow = c.row(i).data();
    for (std::size_t j = 0; j < v.size(); ++j) crow[j] = u[i] * v[j];
  }
  return c;
}

template <Real T>
Matrix<T>& axpy_into(T alpha, const Matrix<T>& x, Matrix<T>& y) {
  if (!x.same_shape(y)) shape_mismatch("axpy_into", x.rows(), x.cols(), y.rows(), y.cols());
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
  return y;
}

template <Real T>
double max_rel_diff(const Matrix<T>& a, const Matrix<T>& b, double floor) {
  if (!a.same_shape(b)) shape_mismatch("max_rel_diff", a.rows(), a.cols(), b.rows(), b.cols());
  double worst = 0.0;
  auto as = a.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < as.size(); ++i) {
    const double x = as[i], y = bs[i];
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

template <Real T>
bool all_finite(const Matrix<T>& m) {
  for (T x : m.data())
    if (!std::isfinite(x)) return false;
  return true;
}

#define STRATA_INSTANTIATE(T)                                                      \
  template class Matrix<T>;                                                        \
  template class Vector<T>;                                                        \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);                   \
  template Matrix<T> matmul_nt(const Matrix<T>&, const Matrix<T>&);                \
  template Matrix<T> matmul_tn(const Matrix<T>&, const Matrix<T>&);                \
  template Matrix<T> outer(std::span<const T>, std::span<const T>);                \
  template Matrix<T>& axpy_into(T, const Matrix<T>&, Matrix<T>&);                  \
  template double max_rel_diff(const Matrix<T>&, const Matrix<T>&, double);        \
  template bool all_finite(const Matrix<T>&);

STRATA_INSTANTIATE(float)
STRATA_INSTANTIATE(double)

#undef STRATA_INSTANTIATE

}  // namespace strata
