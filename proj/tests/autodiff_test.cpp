// Copyright 2026 The Biaslab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "biaslab/autodiff.hpp"

#include <gtest/gtest.h>

#include "gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace biaslab::ad {
namespace {

using namespace gradcheck;


TEST(Forward, Examples) {
  Tape t;
  auto a = t.variable(Tensor({2}, {1, 2}));
  auto b = t.variable(Tensor({2}, {3, 4}));
  EXPECT_EQ(add(a, b).value(), Tensor({2}, {4, 6}));
  auto r = t.variable(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(relu(r).value(), Tensor({3}, {0, 0, 2}));
  auto z = t.variable(Tensor({2}, {0, 0}));
  EXPECT_EQ(softmax(z).value(), Tensor({2}, {0.5, 0.5}));
}

TEST(Forward, ShapeMismatchNamesPrimitiveAndShapes) {
  Tape t;
  auto a = t.variable(Tensor({2, 3}));
  auto b = t.variable(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
  }
  auto c = t.variable(Tensor({3}));
  EXPECT_THROW(add(a, c), std::invalid_argument);
}

TEST(Backward, AnalyticExamples) {
  Tape t;
  auto x = t.variable(Tensor::scalar(3.0));
  auto f = mul(x, x);
  EXPECT_DOUBLE_EQ(t.backward(f, {x})[0].value().item(), 6.0);

  auto y = t.variable(Tensor::scalar(-1.0));
  EXPECT_DOUBLE_EQ(t.backward(relu(y), {y})[0].value().item(), 0.0);
  auto k = t.variable(Tensor::scalar(0.0));
  EXPECT_DOUBLE_EQ(t.backward(relu(k), {k})[0].value().item(), 0.0);
}

TEST(Backward, RejectsNonScalarOutput) {
  Tape t;
  auto x = t.variable(Tensor({2}, {1, 2}));
  EXPECT_THROW(t.backward(x, {x}), std::invalid_argument);
}

TEST(Backward, SoftmaxCrossEntropyMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Tensor logits = random_tensor(rng, {3}, -2, 2);
  const Tensor onehot({3}, {0, 1, 0});
  auto loss = [&](const std::vector<Tensor>& args) {
    Tape t;
    auto w = t.variable(args[0]);
    return scale(sum(mul(t.constant(onehot), log(softmax(w)))), -1.0).value().item();
  };
  Tape t;
  auto w = t.variable(logits);
  auto l = scale(sum(mul(t.constant(onehot), log(softmax(w)))), -1.0);
  const Tensor grad = t.backward(l, {w})[0].value();
  const Tensor fd = finite_difference(loss, {logits})[0];
  EXPECT_LT(relative_error(grad, fd), 1e-4);
}

TEST(GradOfGrad, CubeSquaredDerivative) {
  Tape t;
  auto x = t.variable(Tensor::scalar(2.0));
  auto f = mul(mul(x, x), x);
  auto df = t.backward(f, {x})[0];
  auto g = square(df);
  EXPECT_NEAR(t.grad_of_grad(g, std::vector<Var>{x})[0].value().item(), 288.0, 1e-9);
}

TEST(GradOfGrad, LinearSaliencyHasZeroSecondDerivative) {
  std::mt19937_64 rng(3);
  Tape t;
  auto x = t.variable(random_tensor(rng, {1, 4}));
  auto w = t.variable(random_tensor(rng, {4, 1}));
  auto logit = sum(matmul(x, w));
  auto sal = t.backward(logit, {x})[0];
  auto g = sum(square(sal));
  const Tensor d = t.grad_of_grad(g, std::vector<Var>{x})[0].value();
  EXPECT_EQ(d.data.norm(), 0.0);
}

TEST(GradOfGrad, AbsHasNoSecondDerivative) {
  Tape t;
  auto x = t.variable(Tensor({2}, {1, -2}));
  auto gx = t.backward(sum(square(abs(x))), {x})[0];
  try {
    t.grad_of_grad(sum(gx), std::vector<Var>{x});
    FAIL() << "expected rejection";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("abs"), std::string::npos);
  }
}

TEST(GradOfGrad, AttributionLossMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::vector<Tensor> params = {random_tensor(rng, {6, 5}), random_tensor(rng, {5, 1})};
  const Tensor x = random_tensor(rng, {1, 6}, 0, 1);
  const Tensor ref = random_tensor(rng, {1, 6});

  Tape t;
  auto w1 = t.variable(params[0]);
  auto w2 = t.variable(params[1]);
  auto xv = t.variable(x);
  auto out = sum(matmul(relu(matmul(xv, w1)), w2));
  auto sal = t.backward(out, {xv})[0];
  auto latr = mean(square(sub(sal, t.constant(ref))));
  auto grads = t.grad_of_grad(latr, std::vector<Var>{w1, w2});

  auto fd = finite_difference([&](const std::vector<Tensor>& p) { return attribution_objective(p, x, ref); }, params);
  EXPECT_LT(relative_error(grads[0].value(), fd[0]), 1e-3);
  EXPECT_LT(relative_error(grads[1].value(), fd[1]), 1e-3);
}

class PrimitiveGradient : public ::testing::TestWithParam<Primitive> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferencesOn100Instances) {
  std::mt19937_64 rng(1000 + static_cast<int>(GetParam()));
  int checked = 0;
  while (checked < 100) {
    Case c = random_case(rng, GetParam());
    if (near_kink(c)) continue;
    // Contract the output with a fixed random cotangent to get a scalar.
    Tensor probe;
    {
      Tape t;
      std::vector<Var> vars;
      for (auto& a : c.args) vars.push_back(t.variable(a));
      probe = random_tensor(rng, forward_primitive(c.kind, vars).shape());
    }
    auto objective = [&](const std::vector<Tensor>& args) {
      Tape t;
      std::vector<Var> vars;
      for (auto& a : args) vars.push_back(t.variable(a));
      return sum(mul(forward_primitive(c.kind, vars), t.constant(probe))).value().item();
    };
    Tape t;
    std::vector<Var> vars;
    for (auto& a : c.args) vars.push_back(t.variable(a));
    auto grads = t.backward(sum(mul(forward_primitive(c.kind, vars), t.constant(probe))), vars);
    auto fd = finite_difference(objective, c.args);
    for (std::size_t i = 0; i < grads.size(); ++i)
      ASSERT_LT(relative_error(grads[i].value(), fd[i]), 1e-4) << "primitive " << static_cast<int>(GetParam());
    ++checked;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient,
                         ::testing::Values(Primitive::kAdd, Primitive::kSub, Primitive::kMul, Primitive::kMatmul,
                                           Primitive::kConv2d, Primitive::kRelu, Primitive::kMaxPool2x2,
                                           Primitive::kFlatten, Primitive::kSoftmax, Primitive::kLog,
                                           Primitive::kSum, Primitive::kMean, Primitive::kSquare));

TEST(Tape, ReplayIsBitIdentical) {
  std::mt19937_64 rng(5);
  Tape t;
  auto x = t.variable(random_tensor(rng, {2, 1, 6, 6}));
  auto w = t.variable(random_tensor(rng, {3, 1, 3, 3}));
  auto y = sum(square(maxpool2x2(relu(conv2d(x, w)))));
  t.backward(y, {x, w});
  const auto values = t.replay();
  ASSERT_EQ(values.size(), t.size());
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_TRUE(values[i] == t.node(static_cast<int>(i)).value) << i;
}

TEST(Backward, IsLinear) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    auto x = t.variable(random_tensor(rng, {3, 4}));
    auto f = sum(square(x));
    auto g = mean(mul(x, t.constant(random_tensor(rng, {3, 4}))));
    const Tensor both = t.backward(add(f, g), {x})[0].value();
    const Tensor sep = add(t.backward(f, {x})[0], t.backward(g, {x})[0]).value();
    EXPECT_LT((both.data - sep.data).norm(), 1e-12);
  }
}

TEST(Kernels, Conv2dMatchesQuadrupleLoopExactly) {
  // Small integers keep every product and partial sum exact, so summation
  // order cannot matter.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> val(-4, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 2, c = 1 + trial % 3, o = 2, h = 3 + trial, w = 8 - trial;
    Tensor x({n, c, h, w}), k({o, c, 3, 3});
    for (auto& v : x.data) v = val(rng);
    for (auto& v : k.data) v = val(rng);
    Tensor ref({n, o, h, w});
    for (int b = 0; b < n; ++b)
      for (int oc = 0; oc < o; ++oc)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            double acc = 0;
            for (int ic = 0; ic < c; ++ic)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int sy = y + ky - 1, sx = xx + kx - 1;
                  if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                  acc += k.data[((oc * c + ic) * 3 + ky) * 3 + kx] * x.data[((b * c + ic) * h + sy) * w + sx];
                }
            ref.data[((b * o + oc) * h + y) * w + xx] = acc;
          }
    EXPECT_TRUE(kernels::conv2d(x, k) == ref) << "trial " << trial;
  }
}

TEST(Kernels, MaxPoolTieGoesToFirstElement) {
  Tensor x({1, 1, 2, 2}, {5, 5, 5, 5});
  std::vector<int> winners;
  kernels::maxpool2x2(x, &winners);
  EXPECT_EQ(winners, std::vector<int>{0});
}

TEST(Log, ClampsZeroAndCounts) {
  Tape t;
  auto p = t.variable(Tensor({2}, {0.0, 1.0}));
  auto l = log(p);
  EXPECT_NEAR(l.value().data[0], std::log(1e-12), 1e-9);
  EXPECT_EQ(t.clamped_logs(), 1);
}

}  // namespace
}  // namespace biaslab::ad
