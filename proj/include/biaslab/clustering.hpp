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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace biaslab {

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;          // numbered by first appearance
  Eigen::MatrixXd centroids;        // k-means only; rows follow `labels`
  double inertia = 0;
  std::vector<double> inertia_trace;  // per Lloyd iteration, best restart
  bool degenerate = false;          // some cluster ended up empty
};

// k-means++ seeding, Lloyd to a fixed point or max_iter. Restart r uses
// seed + r; the lowest inertia wins.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
                         int max_iter = 300);

// Binary union k-NN affinity.
Eigen::MatrixXd knn_affinity(const Eigen::MatrixXd& points, int knn_k);
// Eigenvalues (ascending) of I - D^-1/2 A D^-1/2.
Eigen::VectorXd laplacian_spectrum(const Eigen::MatrixXd& affinity);

// Bottom-k eigenvectors of the normalized Laplacian, rows normalized, then
// k-means.
ClusterAssignment spectral_cluster(const Eigen::MatrixXd& points, int k, int knn_k, std::uint64_t seed,
                                   int restarts = 10);

enum class SelectMethod { kElbow, kEigengap };

// k with the largest second difference of the curve (values[i] belongs to
// k_min + i). Flat or convex-free curves give k_min with a warning.
int elbow_k(std::span<const double> inertia, int k_min);
// k in [k_min, k_max] maximizing lambda_{k+1} - lambda_k (1-based).
int eigengap_k(const Eigen::VectorXd& eigenvalues, int k_min, int k_max);

int select_k(const Eigen::MatrixXd& points, int k_min, int k_max, SelectMethod method, std::uint64_t seed,
             int knn_k = 10);

// Same clusters regardless of label names.
bool same_partition(std::span<const int> a, std::span<const int> b);

}  // namespace biaslab
