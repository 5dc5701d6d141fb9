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

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "strata/errors.hpp"
#include "strata/tensor.hpp"

namespace strata {
namespace {

using testing::naive_matmul;
using testing::random_matrix;
using testing::rel_error;
using testing::transpose;

TEST(Matrix, ZeroFilledAndShaped) {
  Matrix<float> m(2, 3);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  for (float x : m.data()) EXPECT_EQ(x, 0.0f);
  EXPECT_THROW(Matrix<float>(0, 3), ShapeError);
  EXPECT_THROW(Matrix<float>(2, 2, {1, 2, 3}), ShapeError);
}

TEST(Matrix, LiteralIsRowMajor) {
  const Matrix<double> m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m(0, 2), 3);
  EXPECT_EQ(m(1, 0), 4);
  EXPECT_EQ(m.row(1)[1], 5);
}

TEST(Matmul, SmallKnownProduct) {
  const Matrix<double> a{{1, 2}, {3, 4}};
  const Matrix<double> b{{5, 6}, {7, 8}};
  EXPECT_EQ(matmul(a, b), (Matrix<double>{{19, 22}, {43, 50}}));
  EXPECT_EQ(matmul(a, Matrix<double>::identity(2)), a);
}

TEST(Matmul, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 17);
    const auto m = dim(rng), k = dim(rng), n = dim(rng);
    const auto a = random_matrix<double>(m, k, rng);
    const auto b = random_matrix<double>(k, n, rng);
    EXPECT_LT(rel_error(matmul(a, b), naive_matmul(a, b), 1e-9), 1e-12);
    EXPECT_LT(rel_error(matmul_nt(a, transpose(b)), naive_matmul(a, b), 1e-9), 1e-12);
    EXPECT_LT(rel_error(matmul_tn(transpose(a), b), naive_matmul(a, b), 1e-9), 1e-12);
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  const Matrix<float> a(2, 3), b(2, 3);
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(matmul_nt(a, Matrix<float>(2, 4)), ShapeError);
  EXPECT_THROW(matmul_tn(a, Matrix<float>(3, 3)), ShapeError);
}

TEST(Outer, MatchesDoubleLoop) {
  const Vector<double> u{1, -2, 3};
  const Vector<double> v{4, 0.5};
  const auto m = outer(u, v);
  ASSERT_EQ(m.rows(), 3u);
  ASSERT_EQ(m.cols(), 2u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(m(i, j), u[i] * v[j]);
}

TEST(Outer, BasisVectorsPickOneEntry) {
  const auto m = outer(Vector<float>::basis(4, 1), Vector<float>::basis(3, 2));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m(i, j), (i == 1 && j == 2) ? 1.0f : 0.0f);
}

TEST(Axpy, AccumulatesInPlace) {
  Matrix<double> y{{1, 1}, {1, 1}};
  axpy_into(2.0, Matrix<double>{{1, 2}, {3, 4}}, y);
  EXPECT_EQ(y, (Matrix<double>{{3, 5}, {7, 9}}));
  EXPECT_THROW(axpy_into(1.0, Matrix<double>(1, 2), y), ShapeError);
}

TEST(MaxRelDiff, UsesTheLargerMagnitude) {
  const Matrix<double> a{{1.0, 100.0}};
  const Matrix<double> b{{1.0, 101.0}};
  EXPECT_DOUBLE_EQ(max_rel_diff(a, b), 1.0 / 101.0);
  EXPECT_EQ(max_rel_diff(a, a), 0.0);
}

TEST(AllFinite, DetectsNanAndInf) {
  Matrix<float> m(2, 2);
  EXPECT_TRUE(all_finite(m));
  m(1, 1) = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(all_finite(m));
  m(1, 1) = std::nanf("");
  EXPECT_FALSE(all_finite(m));
}

TEST(Cast, RoundTripsExactlyRepresentableValues) {
  const Matrix<double> d{{0.5, -2.25}, {1024, 3}};
  EXPECT_EQ(cast<double>(cast<float>(d)), d);
}

}  // namespace
}  // namespace strata
