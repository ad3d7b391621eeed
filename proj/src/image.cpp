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

#include "biaslab/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biaslab {

Image resize_bilinear(const Image& img, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("resize: target must be positive");
  if (rows == img.rows() && cols == img.cols()) return img;
  Image out(rows, cols);
  const double sy = static_cast<double>(img.rows()) / rows;
  const double sx = static_cast<double>(img.cols()) / cols;
  for (int y = 0; y < rows; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.rows() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min<int>(y0 + 1, img.rows() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < cols; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.cols() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min<int>(x0 + 1, img.cols() - 1);
      const double wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                  wy * ((1 - wx) * img(y1, x0) + wx * img(y1, x1));
    }
  }
  return out;
}

Eigen::VectorXd flatten(const Image& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
}

Eigen::MatrixXd stack_rows(std::span<const Image> images) {
  if (images.empty()) return {};
  Eigen::MatrixXd out(images.size(), images.front().size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != out.cols()) throw std::invalid_argument("stack_rows: image sizes differ");
    out.row(i) = flatten(images[i]).transpose();
  }
  return out;
}

}  // namespace biaslab
