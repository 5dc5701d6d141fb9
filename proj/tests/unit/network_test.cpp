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
#include "strata/network.hpp"

namespace strata {
namespace {

using namespace strata::testing;

TEST(Profiles, FullyConnectedShapes) {
  const Network<double> net(mlp(10, 8, 3));
  ASSERT_EQ(net.layer_count(), 4);
  const auto& p = net.profile(1);
  EXPECT_EQ(p.m, 8u);
  EXPECT_EQ(p.n, 10u);
  EXPECT_TRUE(p.bias);
  EXPECT_EQ(p.param_count, 8u * 11u);
  EXPECT_EQ(net.param_count(), 8u * 11u + 3u * 9u);
  EXPECT_EQ(net.parameterized_layers(), (std::vector<int>{1, 3}));
}

TEST(Profiles, ConvAndPoolShapes) {
  ModelSpec s;
  s.input = Shape3{3, 32, 32};
  s.classes = 10;
  s.layers = {conv(16, 5, 1, 2), relu(), maxpool(2, 2), fc(10), softmax()};
  const Network<float> net(s);
  EXPECT_EQ(net.profile(1).m, 16u);
  EXPECT_EQ(net.profile(1).n, 75u);
  EXPECT_EQ(net.profile(1).out_shape, (Shape3{16, 32, 32}));
  EXPECT_EQ(net.profile(3).out_shape, (Shape3{16, 16, 16}));
  EXPECT_EQ(net.profile(4).n, 16u * 16u * 16u);
}

TEST(Profiles, RejectsBrokenSpecs) {
  ModelSpec no_loss = mlp(4, 4, 2);
  no_loss.layers.pop_back();
  EXPECT_THROW(Network<float>{no_loss}, ConfigError);

  ModelSpec wrong_width = mlp(4, 4, 2);
  wrong_width.layers[2].outputs = 3;
  EXPECT_THROW(Network<float>{wrong_width}, ConfigError);

  ModelSpec huge_kernel;
  huge_kernel.input = Shape3{1, 4, 4};
  huge_kernel.classes = 2;
  huge_kernel.layers = {conv(2, 5, 1, 0), fc(2), softmax()};
  EXPECT_THROW(Network<float>{huge_kernel}, ConfigError);

  ModelSpec zero_fc = mlp(4, 0, 2);
  EXPECT_THROW(Network<float>{zero_fc}, ConfigError);

  ModelSpec loss_in_middle = mlp(4, 2, 2);
  loss_in_middle.layers.insert(loss_in_middle.layers.begin(), softmax());
  EXPECT_THROW(Network<float>{loss_in_middle}, ConfigError);
}

TEST(Init, SeededAndBounded) {
  const Network<double> net(mlp(20, 30, 4));
  const auto a = net.init_params(5);
  EXPECT_EQ(a, net.init_params(5));
  EXPECT_NE(a, net.init_params(6));
  const double r = std::sqrt(6.0 / (30 + 20));
  const auto& w = a.layer(1);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j + 1 < w.cols(); ++j) EXPECT_LE(std::fabs(w(i, j)), r);
    EXPECT_EQ(w(i, w.cols() - 1), 0.0);  // bias column
  }
  EXPECT_TRUE(a.layer(2).empty());
}

TEST(Forward, ZeroWeightsGiveLogClasses) {
  const Network<double> net(mlp(6, 5, 8));
  std::mt19937_64 rng(3);
  const auto batch = random_batch<double>(net.spec(), 4, rng);
  const auto trace = net.forward(net.zero_params(), batch);
  EXPECT_NEAR(trace.loss, std::log(8.0), 1e-15);
  for (double p : trace.activations.back().data()) EXPECT_DOUBLE_EQ(p, 1.0 / 8);
}

TEST(Forward, IncrementalMatchesWhole) {
  const Network<double> net(gradient_check_models()[2]);
  std::mt19937_64 rng(4);
  const auto state = net.init_params(1);
  const auto batch = random_batch<double>(net.spec(), 3, rng);
  auto trace = net.begin_forward(batch);
  for (int l = 1; l <= net.layer_count(); ++l) net.forward_layer(state, trace, l);
  EXPECT_EQ(trace, net.forward(state, batch));
}

TEST(Forward, LayersMustRunInOrder) {
  const Network<double> net(mlp(3, 3, 2));
  std::mt19937_64 rng(4);
  auto trace = net.begin_forward(random_batch<double>(net.spec(), 2, rng));
  EXPECT_THROW(net.forward_layer(net.init_params(1), trace, 2), ProtocolError);
}

TEST(Forward, RejectsBadBatches) {
  const Network<double> net(mlp(3, 3, 2));
  DataBatch<double> b;
  b.features = Matrix<double>(2, 4);
  b.labels = {0, 1};
  EXPECT_THROW(net.begin_forward(b), ShapeError);
  b.features = Matrix<double>(2, 3);
  b.labels = {0, 2};
  EXPECT_THROW(net.begin_forward(b), ShapeError);
}

TEST(Backward, FiniteDifferencesOnEveryLayerKind) {
  std::mt19937_64 rng(21);
  for (const auto& spec : gradient_check_models()) {
    const Network<double> net(spec);
    const auto state = net.init_params(9);
    const auto batch = random_batch<double>(spec, 3, rng);
    EXPECT_LT(finite_difference_error(net, state, batch, rng), 1e-4);
  }
}

TEST(Backward, StepsMustGoTopDown) {
  const Network<double> net(mlp(3, 3, 2));
  std::mt19937_64 rng(4);
  const auto state = net.init_params(1);
  const auto trace = net.forward(state, random_batch<double>(net.spec(), 2, rng));
  BackwardPass<double> pass(net, trace);
  EXPECT_EQ(pass.next_layer(), 4);
  EXPECT_THROW(pass.step(state, 3), ProtocolError);
  pass.step(state, 4);
  EXPECT_EQ(pass.next_layer(), 3);
}

TEST(Backward, WorkerShareScalesTheGradient) {
  const Network<double> net(mlp(4, 3, 2));
  std::mt19937_64 rng(8);
  const auto state = net.init_params(2);
  const auto batch = random_batch<double>(net.spec(), 4, rng);
  const auto one = net.gradients(state, batch, 1);
  const auto four = net.gradients(state, batch, 4);
  for (int l : net.parameterized_layers())
    for (std::size_t i = 0; i < one.layer(l).size(); ++i)
      EXPECT_NEAR(four.layer(l).data()[i] * 4, one.layer(l).data()[i], 1e-15);
}

TEST(Backward, FactorsOnlySkipsTheDenseGradient) {
  const Network<double> net(mlp(4, 3, 2));
  std::mt19937_64 rng(8);
  const auto state = net.init_params(2);
  const auto trace = net.forward(state, random_batch<double>(net.spec(), 5, rng));
  BackwardPass<double> pass(net, trace);
  pass.step(state, 4);
  const auto rec = pass.step(state, 3, GradientForm::kFactorsOnly);
  EXPECT_TRUE(rec.gradient.empty());
  EXPECT_EQ(rec.output_error.rows(), 5u);
  EXPECT_EQ(rec.output_error.cols(), 2u);
  EXPECT_EQ(rec.input_activation.cols(), 3u);
}

TEST(Fingerprint, TracksEveryField) {
  const auto base = mlp(4, 3, 2);
  auto other = base;
  EXPECT_EQ(fingerprint(base), fingerprint(other));
  other.layers[0].bias = false;
  EXPECT_NE(fingerprint(base), fingerprint(other));
  other = base;
  other.input.width = 5;
  EXPECT_NE(fingerprint(base), fingerprint(other));
}

}  // namespace
}  // namespace strata
