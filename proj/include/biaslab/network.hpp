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

// Sequential image classifiers built from conv / relu / pool / dense layers.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biaslab/autodiff.hpp"
#include "biaslab/image.hpp"

namespace biaslab {

enum class LayerKind { kNormalize, kConv2d, kRelu, kMaxPool2x2, kFlatten, kDense };

struct Layer {
  LayerKind kind;
  std::string name;
  int in = 0;   // channels (conv) or features (dense)
  int out = 0;
  bool bias = true;
  double shift = 0;  // normalize: (x - shift) * gain
  double gain = 1;
};

using ParamMap = std::map<std::string, ad::Tensor>;
using BoundParams = std::map<std::string, ad::Var>;
using Activations = std::map<std::string, ad::Var>;

class Network {
 public:
  Network() = default;
  Network(int rows, int cols, std::vector<Layer> layers, ParamMap params);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int num_classes() const;
  const std::vector<Layer>& layers() const { return layers_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }
  std::size_t parameter_count() const;
  bool has_layer(const std::string& name) const;

  // Puts every parameter on the tape as a leaf.
  BoundParams bind(ad::Tape& tape) const;

  // x: [N,1,rows,cols] -> logits [N, classes]. When `activations` is given
  // it receives the output of every named layer.
  ad::Var forward(ad::Tape& tape, const BoundParams& params, ad::Var x,
                  Activations* activations = nullptr) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Layer> layers_;
  ParamMap params_;
};

// Input normalization (x - 0.5) * 2, then
// conv(1->8) relu pool conv(8->16) relu pool flatten dense(32) relu dense(classes).
// Side must be divisible by 4.
Network make_tiny_cnn(int side, int classes, std::uint64_t seed);

// Flatten followed by dense layers with relu between them. Handy for small
// analytic models in tests and metrics.
Network make_mlp(int rows, int cols, const std::vector<int>& hidden, int classes, std::uint64_t seed,
                 bool bias = true);

// Glorot-uniform weights, zero biases.
ParamMap init_params(const std::vector<Layer>& layers, std::uint64_t seed);

ad::Tensor to_batch(std::span<const Image> images);
Image from_batch(const ad::Tensor& batch, int index);

Eigen::MatrixXd logits(const Network& net, std::span<const Image> images, int batch_size = 128);
Eigen::MatrixXd probabilities(const Network& net, std::span<const Image> images, int batch_size = 128);

// Row-wise argmax, ties toward the lower class index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

}  // namespace biaslab
