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

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "strata/errors.hpp"
#include "strata/solver.hpp"

namespace strata {
namespace {

using testing::random_matrix;

TEST(LrAt, Policies) {
  SolverConfig c;
  c.epsilon = 0.5;
  c.total_iters = 10;
  EXPECT_EQ(lr_at(c, 0), 0.5);
  EXPECT_EQ(lr_at(c, 10), 0.5);

  c.lr_policy = LrPolicy::kStep;
  c.gamma = 0.1;
  c.step_size = 3;
  EXPECT_DOUBLE_EQ(lr_at(c, 2), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(c, 3), 0.05);
  EXPECT_DOUBLE_EQ(lr_at(c, 9), 0.5e-3);

  c.lr_policy = LrPolicy::kPolynomial;
  c.power = 2;
  EXPECT_DOUBLE_EQ(lr_at(c, 5), 0.5 * 0.25);
  EXPECT_EQ(lr_at(c, 10), 0.0);
}

TEST(LrAt, BoundsAreInclusive) {
  SolverConfig c;
  c.total_iters = 4;
  EXPECT_NO_THROW(lr_at(c, 4));
  EXPECT_THROW(lr_at(c, 5), ConfigError);
  EXPECT_THROW(lr_at(c, -1), ConfigError);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr_policy = LrPolicy::kStep;
  c.step_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_lr_policy("poly"), LrPolicy::kPolynomial);
  EXPECT_THROW(parse_lr_policy("cosine"), ConfigError);
}

// Each coordinate follows the scalar recurrence independently.
TEST(ApplyUpdate, MatchesScalarRecurrence) {
  std::mt19937_64 rng(2);
  SolverConfig c;
  c.epsilon = 0.1;
  c.momentum = 0.9;
  c.weight_decay = 0.01;
  c.lr_policy = LrPolicy::kStep;
  c.gamma = 0.5;
  c.step_size = 2;
  c.total_iters = 6;
  auto params = random_matrix<double>(3, 4, rng);
  Matrix<double> velocity;
  std::vector<double> p(params.data().begin(), params.data().end());
  std::vector<double> v(p.size(), 0.0);
  for (int t = 0; t < 6; ++t) {
    const auto g = random_matrix<double>(3, 4, rng);
    apply_update(params, g, velocity, c, t);
    const double lr = 0.1 * std::pow(0.5, t / 2);
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = 0.9 * v[i] - lr * (g.data()[i] + 0.01 * p[i]);
      p[i] += v[i];
      EXPECT_NEAR(params.data()[i], p[i], 1e-15);
    }
  }
}

TEST(ApplyUpdate, ShapeChecks) {
  Matrix<float> p(2, 2), g(2, 3), v;
  EXPECT_THROW(apply_update(p, g, v, SolverConfig{}, 0), ShapeError);
  Matrix<float> g2(2, 2), bad_v(1, 1);
  EXPECT_THROW(apply_update(p, g2, bad_v, SolverConfig{}, 0), ShapeError);
}

TEST(SolverState, ZerosLikeSkipsUnparameterizedLayers) {
  const Network<float> net(testing::mlp(3, 4, 2));
  const auto s = SolverState<float>::zeros_like(net.init_params(1));
  ASSERT_EQ(s.velocity.size(), 4u);
  EXPECT_EQ(s.layer(1).rows(), 4u);
  EXPECT_EQ(s.layer(1).cols(), 4u);
  EXPECT_TRUE(s.layer(2).empty());
}

}  // namespace
}  // namespace strata
