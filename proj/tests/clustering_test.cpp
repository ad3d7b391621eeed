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

#include "biaslab/clustering.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "biaslab/log.hpp"
#include "biaslab/random.hpp"

namespace biaslab {
namespace {

struct QuietWarnings {
  QuietWarnings() : prev(set_warning_sink([](std::string_view) {})) {}
  ~QuietWarnings() { set_warning_sink(prev); }
  WarningSink prev;
};

Eigen::MatrixXd two_cliques() {
  Eigen::MatrixXd p(10, 2);
  for (int i = 0; i < 5; ++i) {
    p.row(i) << 0.1 * i, 0.05 * (i % 2);
    p.row(5 + i) << 50 + 0.1 * i, 50 + 0.05 * (i % 2);
  }
  return p;
}

// Two concentric rings with 30 points each; ring membership is the oracle.
Eigen::MatrixXd rings(std::vector<int>* membership) {
  Eigen::MatrixXd p(60, 2);
  membership->assign(60, 0);
  for (int i = 0; i < 30; ++i) {
    const double a = 2 * std::numbers::pi * i / 30, b = a + 0.05;
    p.row(i) << std::cos(a), std::sin(a);
    p.row(30 + i) << 4 * std::cos(b), 4 * std::sin(b);
    (*membership)[30 + i] = 1;
  }
  return p;
}

TEST(Kmeans, SeparatedPairsSplitExactly) {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 0, 1, 10, 10, 10, 11;
  const auto a = kmeans(p, 2, 1);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_DOUBLE_EQ(a.inertia, 1.0);
}

TEST(Kmeans, SingleClusterIsTheMean) {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 2, 0, 0, 4, 2, 4;
  const auto a = kmeans(p, 1, 3);
  EXPECT_TRUE(a.centroids.row(0).isApprox(Eigen::RowVector2d(1, 2)));
  EXPECT_DOUBLE_EQ(a.inertia, 4 * (1.0 + 4.0));
}

TEST(Kmeans, KEqualsNHasZeroInertia) {
  Rng rng(2);
  Eigen::MatrixXd p(7, 3);
  for (int i = 0; i < 21; ++i) p.data()[i] = uniform(rng);
  EXPECT_EQ(kmeans(p, 7, 4).inertia, 0.0);
}

TEST(Kmeans, RejectsKAboveN) {
  EXPECT_THROW(kmeans(Eigen::MatrixXd::Zero(3, 2), 4, 0), std::invalid_argument);
}

TEST(Kmeans, InertiaNeverIncreasesAcrossIterations) {
  Rng rng(5);
  Eigen::MatrixXd p(200, 2);
  for (int i = 0; i < 400; ++i) p.data()[i] = normal(rng);
  const auto a = kmeans(p, 6, 9, 1);
  ASSERT_GE(a.inertia_trace.size(), 2u);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) EXPECT_LE(a.inertia_trace[i], a.inertia_trace[i - 1] + 1e-12);
}

TEST(Kmeans, DeterministicAndOrderEquivalent) {
  Rng rng(6);
  Eigen::MatrixXd p(40, 2);
  for (int i = 0; i < 20; ++i) p.row(i) << normal(rng, 0, 0.3), normal(rng, 0, 0.3);
  for (int i = 20; i < 40; ++i) p.row(i) << normal(rng, 5, 0.3), normal(rng, 5, 0.3);
  const auto a = kmeans(p, 2, 11), b = kmeans(p, 2, 11);
  EXPECT_EQ(a.labels, b.labels);
  const Eigen::MatrixXd reversed = p.colwise().reverse();
  auto c = kmeans(reversed, 2, 11);
  std::reverse(c.labels.begin(), c.labels.end());
  EXPECT_TRUE(same_partition(a.labels, c.labels));
}

TEST(Kmeans, DuplicatePointsReportDegenerateClusters) {
  QuietWarnings quiet;
  const long before = warning_count();
  const auto a = kmeans(Eigen::MatrixXd::Zero(5, 2), 3, 0, 1);
  EXPECT_TRUE(a.degenerate);
  EXPECT_GT(warning_count(), before);
}

TEST(Spectral, DisconnectedCliquesSplitExactly) {
  const auto a = spectral_cluster(two_cliques(), 2, 4, 0);
  EXPECT_TRUE(same_partition(a.labels, std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
}

TEST(Spectral, SingleCliqueIsOneCluster) {
  Eigen::MatrixXd p(5, 2);
  p << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.5;
  const auto a = spectral_cluster(p, 1, 4, 0);
  EXPECT_EQ(a.labels, std::vector<int>(5, 0));
}

TEST(Spectral, ConcentricRingsFollowMembership) {
  std::vector<int> ring;
  const Eigen::MatrixXd p = rings(&ring);
  EXPECT_TRUE(same_partition(spectral_cluster(p, 2, 3, 1).labels, ring));
  EXPECT_FALSE(same_partition(kmeans(p, 2, 1).labels, ring));
}

TEST(Spectral, DeterministicPerSeed) {
  std::vector<int> ring;
  const Eigen::MatrixXd p = rings(&ring);
  EXPECT_EQ(spectral_cluster(p, 3, 3, 7).labels, spectral_cluster(p, 3, 3, 7).labels);
}

TEST(SelectK, ElbowOfHandCurve) {
  const std::vector<double> curve{100, 20, 18, 17};
  EXPECT_EQ(elbow_k(curve, 1), 2);
}

TEST(SelectK, FlatCurveFallsBackToSmallestK) {
  QuietWarnings quiet;
  const long before = warning_count();
  const std::vector<double> curve{5, 5, 5, 5};
  EXPECT_EQ(elbow_k(curve, 2), 2);
  EXPECT_EQ(warning_count(), before + 1);
}

TEST(SelectK, EigengapFindsTwoComponents) {
  EXPECT_EQ(select_k(two_cliques(), 1, 5, SelectMethod::kEigengap, 0, 4), 2);
  const Eigen::VectorXd spectrum = laplacian_spectrum(knn_affinity(two_cliques(), 4));
  EXPECT_NEAR(spectrum[0], 0.0, 1e-12);
  EXPECT_NEAR(spectrum[1], 0.0, 1e-12);
  EXPECT_GT(spectrum[2], 0.5);
}

TEST(SelectK, ElbowOnSeparatedBlobs) {
  Rng rng(8);
  Eigen::MatrixXd p(60, 2);
  // Equilateral triangle of blobs: inertia runs about 20s^2, 10s^2, ~0.
  const double cx[] = {0, 10, 5}, cy[] = {0, 0, 10 * std::sqrt(0.75)};
  for (int i = 0; i < 60; ++i) p.row(i) << cx[i % 3] + normal(rng, 0, 0.2), cy[i % 3] + normal(rng, 0, 0.2);
  EXPECT_EQ(select_k(p, 1, 6, SelectMethod::kElbow, 2), 3);
}

TEST(SamePartition, IgnoresLabelNames) {
  EXPECT_TRUE(same_partition(std::vector<int>{0, 0, 1}, std::vector<int>{5, 5, 2}));
  EXPECT_FALSE(same_partition(std::vector<int>{0, 0, 1}, std::vector<int>{1, 2, 2}));
}

}  // namespace
}  // namespace biaslab
