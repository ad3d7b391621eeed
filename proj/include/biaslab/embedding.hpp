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

#include "biaslab/image.hpp"

namespace biaslab {

// Points are rows.
Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points);

struct Geodesics {
  Eigen::MatrixXd distances;
  int repairs = 0;  // bridging edges added to connect the k-NN graph
};

// Union-symmetrized Euclidean k-NN graph, all-pairs Dijkstra. A disconnected
// graph is joined by repeatedly adding the shortest edge between two
// components.
Geodesics knn_geodesics(const Eigen::MatrixXd& points, int k);

// Top `dims` eigenpairs of the double-centred -D^2/2. Columns beyond the
// positive spectrum are zero (with a warning).
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int dims);

struct EmbeddingConfig {
  int k_neighbors = 10;
  int target_dims = 10;
};

Eigen::MatrixXd isomap(const Eigen::MatrixXd& points, const EmbeddingConfig& cfg, int* repairs = nullptr);

// Area-weighted box filter to side x side, flattened row-major.
Eigen::VectorXd downscale(const Image& image, int side);

}  // namespace biaslab
