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

// Image-optimization style transfer (Gatys) with a trained classifier as the
// feature network, and style-transfer data augmentation with pseudo-labels.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biaslab/autodiff.hpp"
#include "biaslab/dataset.hpp"
#include "biaslab/network.hpp"

namespace biaslab {

// Layer name -> [filters, positions].
using FeatureMaps = std::map<std::string, Eigen::MatrixXd>;

struct StyleTransferConfig {
  double alpha = 1.0;  // content weight
  double beta = 1e-3;  // style weight
  std::vector<std::string> content_layers{"conv2"};
  std::vector<std::string> style_layers{"conv1", "conv2"};
  int iterations = 60;
  double step_size = 0.01;  // largest per-pixel change in one step

  void validate(const Network& model) const;
};

FeatureMaps extract_features(const Network& model, const Image& image, const std::vector<std::string>& layers);

// G = F F^T, unnormalized.
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& features);
ad::Var gram_matrix(ad::Var features);

// 1/2 * sum of squared differences at one layer.
double content_loss(const FeatureMaps& base, const FeatureMaps& content, const std::string& layer);
// Sum over layers of squared Gram differences.
double style_loss(const FeatureMaps& base, const FeatureMaps& style, const std::vector<std::string>& layers);

struct NstResult {
  Image image;
  std::vector<double> trace;  // L_total before every step and after the last
  std::vector<double> content_trace;
  std::vector<double> style_trace;
};

// Starts from the content image. Each step moves pixels against the
// gradient, scaled so the largest move equals step_size, then clamps to
// [0, 1].
NstResult nst_optimize(const Image& content, const Image& style, const Network& model, const StyleTransferConfig& cfg);

// Sorts by (score, id) ascending: the first quota0 samples get class 0, the
// rest class 1. Warns when tied scores straddle the split.
std::vector<int> pseudo_label(std::span<const double> scores, int quota0, int quota1,
                              std::span<const std::string> ids = {});

struct StdaConfig {
  StyleTransferConfig nst;
  int content_class = 0;
  int style_class = 1;
  std::uint64_t seed = 0;
};

struct StdaProvenance {
  std::string id;
  std::string content_id;
  std::string style_id;
  int iterations = 0;
  double score = 0;  // model probability of class 1 on the synthesized image
};

struct StdaResult {
  Dataset synthetic;  // every sample is split=train
  std::vector<StdaProvenance> provenance;
};

// Content and style images are drawn with replacement from the training
// split. Labels come from pseudo_label with equal class quotas.
StdaResult stda_generate(const Dataset& data, const Network& model, const StdaConfig& cfg, int pairs);

// id,content_id,style_id,iterations,score,label
std::string stda_provenance_csv(const StdaResult& result);

}  // namespace biaslab
