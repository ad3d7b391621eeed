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
#include <span>
#include <vector>

namespace biaslab {

// Grayscale raster, values nominally in [0, 1].
using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Image clamp01(const Image& img) { return img.cwiseMax(0.0).cwiseMin(1.0); }

// Bilinear resampling with pixel-centre alignment.
Image resize_bilinear(const Image& img, int rows, int cols);

// Row-major flatten.
Eigen::VectorXd flatten(const Image& img);

// Stacks flattened images as rows of a matrix.
Eigen::MatrixXd stack_rows(std::span<const Image> images);

}  // namespace biaslab
