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

#include "biaslab/attribution.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "biaslab/random.hpp"

namespace biaslab {
namespace {

// f(x) = x . w on a 1 x n image, one output.
Network linear_model(std::initializer_list<double> w, double bias = 0) {
  Network net = make_mlp(1, static_cast<int>(w.size()), {}, 1, 0, bias != 0);
  net.params().at("fc1.weight") = ad::Tensor({static_cast<int>(w.size()), 1}, w);
  if (bias != 0) net.params().at("fc1.bias") = ad::Tensor({1}, {bias});
  return net;
}

// Two-class model whose class-1 logit is x . w and class-0 logit is 0.
Network two_class_linear(std::initializer_list<double> w) {
  const int n = static_cast<int>(w.size());
  Network net = make_mlp(1, n, {}, 2, 0, false);
  ad::Tensor W({n, 2});
  int i = 0;
  for (double v : w) W.data[2 * i++ + 1] = v;
  net.params().at("fc1.weight") = W;
  return net;
}

Image row(std::initializer_list<double> v) {
  Image img(1, static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) img(0, i++) = x;
  return img;
}

Image random_image(int rows, int cols, std::uint64_t seed, double lo = 0, double hi = 1) {
  Rng rng(seed);
  Image img(rows, cols);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = uniform(rng, lo, hi);
  return img;
}

Network positive_copy(Network net) {
  for (auto& [name, t] : net.params()) t.data = t.data.cwiseAbs();
  return net;
}

TEST(Saliency, LinearModelIsAbsoluteWeights) {
  const Network net = linear_model({1, -2});
  const auto m = saliency(net, row({0.3, 0.7}), 0);
  EXPECT_EQ(m.values, row({1, 2}));
  EXPECT_EQ(m.signed_values, row({1, -2}));
}

TEST(Saliency, ConstantModelIsZero) {
  Network net = make_tiny_cnn(8, 2, 1);
  net.params().at("fc2.weight").data.setZero();
  EXPECT_EQ(saliency(net, random_image(8, 8, 1), 1).values.maxCoeff(), 0.0);
}

TEST(Saliency, ReluNetMatchesFiniteDifferences) {
  const Network net = make_mlp(4, 4, {6}, 2, 0);
  const Image x = random_image(4, 4, 0);
  const auto m = saliency(net, x, 1);
  const auto f = logit_score(net, 1);
  for (int i = 0; i < 16; ++i) {
    Image up = x, down = x;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    const double fd = (f(up) - f(down)) / 2e-6;
    EXPECT_NEAR(m.signed_values.data()[i], fd, 1e-4);
    EXPECT_NEAR(m.values.data()[i], std::abs(fd), 1e-4);
  }
}

TEST(Saliency, InvariantToLogitShift) {
  Network net = make_tiny_cnn(8, 2, 3);
  const Image x = random_image(8, 8, 2);
  const auto before = saliency(net, x, 0).values;
  net.params().at("fc2.bias").data.array() += 5.0;
  EXPECT_EQ(saliency(net, x, 0).values, before);
}

TEST(Saliency, BatchMatchesSingle) {
  const Network net = make_tiny_cnn(8, 2, 3);
  std::vector<Image> xs{random_image(8, 8, 1), random_image(8, 8, 2), random_image(8, 8, 3)};
  const std::vector<int> t{0, 1, 1};
  const auto batch = saliency_batch(net, xs, t, 2);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(batch[i].isApprox(saliency(net, xs[i], t[i]).signed_values, 1e-12));
}

TEST(Saliency, IsPure) {
  const Network net = make_tiny_cnn(8, 2, 3);
  const Image x = random_image(8, 8, 4);
  EXPECT_EQ(saliency(net, x, 1).values, saliency(net, x, 1).values);
}

TEST(Occlusion, ConstantModelIsZero) {
  Network net = make_tiny_cnn(8, 2, 1);
  net.params().at("fc2.weight").data.setZero();
  EXPECT_EQ(occlusion(net, random_image(8, 8, 1), 0, 2, 2).values.maxCoeff(), 0.0);
}

TEST(Occlusion, FourByFourTilingNeedsFourPatches) {
  const Network net = make_mlp(4, 4, {}, 2, 1);
  int evals = 0;
  occlusion(net, random_image(4, 4, 1), 0, 2, 2, &evals);
  EXPECT_EQ(evals, 4);
}

TEST(Occlusion, ModelReadingOnePixelIsLocal) {
  // f = 3 * x(0,0); patches of 2 with stride 1 on a 4x4 image.
  Network net = make_mlp(4, 4, {}, 1, 0, false);
  net.params().at("fc1.weight").data.setZero();
  net.params().at("fc1.weight").data[0] = 3.0;
  Image x = Image::Constant(4, 4, 0.5);
  const auto m = occlusion(net, x, 0, 2, 1);
  EXPECT_DOUBLE_EQ(m.signed_values(0, 0), 1.5);   // only patch covering it contains (0,0)
  EXPECT_DOUBLE_EQ(m.signed_values(0, 1), 0.75);  // one of two covering patches
  EXPECT_DOUBLE_EQ(m.signed_values(1, 1), 0.375); // one of four
  for (int y = 0; y < 4; ++y)
    for (int c = 0; c < 4; ++c)
      if (y >= 2 || c >= 2) EXPECT_EQ(m.signed_values(y, c), 0.0);
}

TEST(Occlusion, RejectsGapsAndOversizedPatches) {
  const Network net = make_mlp(4, 4, {}, 2, 1);
  EXPECT_THROW(occlusion(net, random_image(4, 4, 1), 0, 2, 3), std::invalid_argument);
  EXPECT_THROW(occlusion(net, random_image(4, 4, 1), 0, 5, 1), std::invalid_argument);
}

TEST(Lrp, SingleLinearLayerConservesTheLogit) {
  const Network net = linear_model({0.5, 1.5, 2.0});
  const Image x = row({0.2, 0.4, 0.9});
  const auto m = lrp_epsilon(net, x, 0, {1e-12, 0});
  EXPECT_NEAR(m.signed_values.sum(), 0.1 + 0.6 + 1.8, 1e-9);
  EXPECT_NEAR(m.signed_values(0, 1), 0.6, 1e-9);
}

TEST(Lrp, GammaRuleHandValues) {
  // w = [1, -0.5], x = [1, 1]: z = 0.5.
  const Network net = linear_model({1, -0.5});
  const auto plain = lrp_epsilon(net, row({1, 1}), 0, {1e-12, 0});
  EXPECT_NEAR(plain.signed_values(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(plain.signed_values(0, 1), -0.5, 1e-9);
  // gamma = 1: rho(w) = [2, -0.5], denominator 1.5.
  const auto favored = lrp_epsilon(net, row({1, 1}), 0, {1e-12, 1.0});
  EXPECT_NEAR(favored.signed_values(0, 0), 2.0 * 0.5 / 1.5, 1e-9);
  EXPECT_NEAR(favored.signed_values(0, 1), -0.5 * 0.5 / 1.5, 1e-9);
  EXPECT_NEAR(favored.values(0, 1), 0.5 * 0.5 / 1.5, 1e-9);
}

TEST(Lrp, ConservationOnPositiveMlp) {
  const Network net = positive_copy(make_mlp(5, 5, {12, 7}, 3, 4));
  const Image x = random_image(5, 5, 5, 0.1, 1.0);
  const double logit = logits(net, std::span(&x, 1))(0, 2);
  const double total = lrp_epsilon(net, x, 2).signed_values.sum();
  EXPECT_LE(std::abs(total - logit) / std::abs(logit), 0.01);
}

TEST(Lrp, ConservationThroughConvAndPooling) {
  const Network net = positive_copy(make_tiny_cnn(8, 2, 6));
  const Image x = random_image(8, 8, 7, 0.55, 1.0);  // positive after input normalization
  const double logit = logits(net, std::span(&x, 1))(0, 1);
  const double total = lrp_epsilon(net, x, 1).signed_values.sum();
  EXPECT_LE(std::abs(total - logit) / std::abs(logit), 0.01);
}

TEST(Lrp, ZeroImageThroughBiasFreeNetIsZero) {
  const Network net = make_mlp(4, 4, {8}, 2, 3, false);
  EXPECT_EQ(lrp_epsilon(net, Image::Zero(4, 4), 0).values.maxCoeff(), 0.0);
}

TEST(Lrp, RejectsNonPositiveEpsilon) {
  EXPECT_THROW(lrp_epsilon(linear_model({1}), row({1}), 0, {0.0, 0.0}), std::invalid_argument);
}

TEST(MaxSensitivity, ConstantExplanationIsZero) {
  const Explainer phi = [](const Image& x) { return Image::Ones(x.rows(), x.cols()); };
  EXPECT_EQ(max_sensitivity(phi, random_image(4, 4, 1), 0.1, 20, 0), 0.0);
}

TEST(MaxSensitivity, IdentityIsBoundedAndGrowsWithSamples) {
  const Explainer phi = [](const Image& x) { return x; };
  const Image x = random_image(6, 6, 2, 0.2, 0.8);
  double prev = 0;
  for (int n : {1, 5, 20, 80}) {
    const double v = max_sensitivity(phi, x, 0.1, n, 3);
    EXPECT_LE(v, 0.1 * 6);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(MaxSensitivity, LinearSaliencyIsZero) {
  const Network net = linear_model({0.3, -1.2, 2.0});
  EXPECT_EQ(max_sensitivity(saliency_explainer(net, 0), row({0.5, 0.5, 0.5}), 0.2, 25, 4), 0.0);
}

TEST(Infidelity, LinearModelWithGradientIsExact) {
  const Network net = make_mlp(4, 4, {}, 1, 8);
  const Image x = random_image(4, 4, 9);
  const auto phi = signed_saliency_explainer(net, 0);
  const auto f = logit_score(net, 0);
  PerturbationSpec spec;
  for (auto kind : {PerturbationKind::kNoisyBaseline, PerturbationKind::kSquareRemoval,
                    PerturbationKind::kSubsetBaseline}) {
    spec.kind = kind;
    spec.square_side = 2;
    EXPECT_LE(infidelity(phi, f, x, spec, 50, 1), 1e-10);
  }
}

TEST(Infidelity, ZeroExplanationEqualsScoreVariance) {
  // Linear f with Gaussian I: E[(w.I)^2] = sigma^2 |w|^2.
  const Network net = make_mlp(3, 3, {}, 1, 10);
  const Image x = random_image(3, 3, 11);
  const Explainer zero = [](const Image& im) { return Image::Zero(im.rows(), im.cols()); };
  PerturbationSpec spec;
  spec.sigma = 0.2;
  const double expected = 0.04 * net.params().at("fc1.weight").data.squaredNorm();
  EXPECT_NEAR(infidelity(zero, logit_score(net, 0), x, spec, 100000, 2), expected, 0.02 * expected);
}

TEST(Infidelity, MonteCarloAgreesWithHighSampleReference) {
  const Network net = make_mlp(4, 4, {6}, 2, 12);
  const Image x = random_image(4, 4, 13);
  const auto phi = signed_saliency_explainer(net, 1);
  const auto f = logit_score(net, 1);
  PerturbationSpec spec;
  spec.sigma = 0.1;
  const double reference = infidelity(phi, f, x, spec, 100000, 99);
  EXPECT_NEAR(infidelity(phi, f, x, spec, 1000, 7), reference, 0.1 * reference);
}

TEST(Perturbation, KindsHaveTheirShape) {
  const Image x = Image::Constant(6, 6, 0.5);
  PerturbationSpec spec;
  spec.kind = PerturbationKind::kSquareRemoval;
  spec.square_side = 3;
  const Image sq = sample_perturbation(spec, x, 1);
  EXPECT_EQ((sq.array() != 0).count(), 9);
  EXPECT_EQ((x - sq).minCoeff(), 0.0);
  spec.kind = PerturbationKind::kSubsetBaseline;
  spec.baseline = Image::Constant(6, 6, 0.2);
  const Image sub = sample_perturbation(spec, x, 2);
  for (Eigen::Index i = 0; i < sub.size(); ++i)
    EXPECT_TRUE(sub.data()[i] == 0.0 || std::abs(sub.data()[i] - 0.3) < 1e-15);
  spec.sigma = -1;
  spec.kind = PerturbationKind::kNoisyBaseline;
  EXPECT_THROW(infidelity([](const Image& i) { return i; }, [](const Image&) { return 0.0; }, x, spec, 1, 0),
               std::invalid_argument);
}

TEST(ModelContrast, SameModelIsZero) {
  const Network net = make_tiny_cnn(8, 2, 3);
  std::vector<Image> xs{random_image(8, 8, 1), random_image(8, 8, 2)};
  const auto pred = argmax_rows(logits(net, xs));
  EXPECT_EQ(model_contrast_score(saliency_attribution(), net, net, Image::Ones(8, 8), xs, pred), 0.0);
}

TEST(ModelContrast, FullMaskIsTotalMassDifference) {
  const Network a = two_class_linear({2, 1}), b = two_class_linear({1, 0.5});
  const std::vector<Image> xs{row({1, 1})};
  const std::vector<int> y{1};
  EXPECT_DOUBLE_EQ(model_contrast_score(saliency_attribution(), a, b, Image::Ones(1, 2), xs, y), 3.0 - 1.5);
}

TEST(ModelContrast, TwoPixelHandCase) {
  // a reads only the masked pixel, b only the unmasked one.
  const Network a = two_class_linear({1, 0}), b = two_class_linear({0, 1});
  const std::vector<Image> xs{row({1, 1})};
  const std::vector<int> y{1};
  EXPECT_DOUBLE_EQ(model_contrast_score(saliency_attribution(), a, b, row({1, 0}), xs, y), 1.0);
}

TEST(ModelContrast, NoCommonCorrectImageIsRejected) {
  const Network a = two_class_linear({1, 0});
  const std::vector<Image> xs{row({1, 1})};
  const std::vector<int> y{0};
  EXPECT_THROW(model_contrast_score(saliency_attribution(), a, a, row({1, 1}), xs, y), std::invalid_argument);
}

// Attribution equal to the image itself; the model always predicts class 0.
const AttributionFn kImageAsAttribution = [](const Network&, const Image& x, int) { return x; };

Network always_class0() {
  Network net = make_mlp(1, 2, {}, 2, 0, true);
  net.params().at("fc1.weight").data.setZero();
  net.params().at("fc1.bias").data << 1, 0;
  return net;
}

TEST(InputDependence, ZeroAttributionGivesZero) {
  const AttributionFn zero = [](const Network&, const Image& x, int) { return Image::Zero(x.rows(), x.cols()); };
  const std::vector<FeaturePair> pairs{{row({1, 0}), row({0, 0}), 0}};
  EXPECT_EQ(input_dependence_rate(zero, always_class0(), pairs, row({1, 0})), 0.0);
}

TEST(InputDependence, HandPairGivesOne) {
  const std::vector<FeaturePair> pairs{{row({0, 0}), row({1, 0}), 0}};
  EXPECT_EQ(input_dependence_rate(kImageAsAttribution, always_class0(), pairs, row({1, 0})), 1.0);
}

TEST(InputDependence, SevenOfTenPairs) {
  std::vector<FeaturePair> pairs;
  for (int i = 0; i < 10; ++i) {
    const double with = i < 7 ? 0.2 : 0.8;
    pairs.push_back({row({with, 0.5}), row({0.5, 0.5}), 0});
  }
  EXPECT_DOUBLE_EQ(input_dependence_rate(kImageAsAttribution, always_class0(), pairs, row({1, 0})), 0.7);
}

TEST(InputDependence, MisclassifiedPairsAreSkipped) {
  std::vector<FeaturePair> pairs{{row({0, 0}), row({1, 0}), 0}, {row({0, 0}), row({1, 0}), 1}};
  EXPECT_EQ(input_dependence_rate(kImageAsAttribution, always_class0(), pairs, row({1, 0})), 1.0);
}

}  // namespace
}  // namespace biaslab
