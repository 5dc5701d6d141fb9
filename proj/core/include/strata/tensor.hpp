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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <type_traits>
#include <vector>

#include "strata/errors.hpp"

namespace strata {

/// Scalar types a run may be configured with.
template <typename T>
concept Real = std::is_same_v<T, float> || std::is_same_v<T, double>;

/// Row-major dense matrix. A default-constructed matrix is empty (0x0) and
/// stands for "absent"; every sized matrix has positive dimensions.
template <Real T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  void fill(T value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Plain dense vector.
template <Real T>
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len);
  explicit Vector(std::vector<T> data);
  Vector(std::initializer_list<T> values) : data_(values) {}

  static Vector basis(std::size_t len, std::size_t index);

  std::size_t size() const { return data_.size(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<T> data_;
};

// Kernels. All loops run in a fixed order so results are reproducible
// bit-for-bit across runs and across the distributed/single-process paths.

/// a * b.
template <Real T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

/// a * b^T.
template <Real T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);

/// a^T * b.
template <Real T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);

/// u v^T.
template <Real T>
Matrix<T> outer(std::span<const T> u, std::span<const T> v);

template <Real T>
Matrix<T> outer(const Vector<T>& u, const Vector<T>& v) {
  return outer<T>(u.data(), v.data());
}

/// y += alpha * x, in place. Returns y for chaining.
template <Real T>
Matrix<T>& axpy_into(T alpha, const Matrix<T>& x, Matrix<T>& y);

/// Largest |a - b| / max(|a|, |b|, floor) over all elements.
template <Real T>
double max_rel_diff(const Matrix<T>& a, const Matrix<T>& b, double floor = 1e-12);

template <Real T>
bool all_finite(const Matrix<T>& m);

/// Converts element type (used when comparing a 32-bit run to a 64-bit oracle).
template <Real To, Real From>
Matrix<To> cast(const Matrix<From>& m) {
  if (m.empty()) return {};
  std::vector<To> out(m.size());
  auto src = m.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src[i]);
  return Matrix<To>(m.rows(), m.cols(), std::move(out));
}

}  // namespace strata
