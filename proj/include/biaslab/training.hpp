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
#include <functional>
#include <span>
#include <vector>

#include "biaslab/autodiff.hpp"
#include "biaslab/dataset.hpp"
#include "biaslab/network.hpp"

namespace biaslab {

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.2;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double lr_decay = 0.9;  // multiplied into the learning rate after every epoch

  void validate() const;
};

// Per-sample augmentation; receives a seed unique to (sample, epoch).
using Augment = std::function<Image(const Image&, std::uint64_t seed)>;

struct TrainResult {
  Network model;
  double initial_loss = 0;          // over the training set before any update
  std::vector<double> epoch_loss;   // mean batch loss per epoch
  int updates = 0;
  int clamped_logs = 0;
};

// Mean cross-entropy of probability rows against one-hot rows. Probabilities
// below 1e-12 at a true class are clamped; `clamped` counts them.
double cross_entropy(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& onehot, int* clamped = nullptr);

// Tape version over logits [N,M] and a constant one-hot [N,M].
ad::Var cross_entropy_from_logits(ad::Var logits, ad::Var onehot);

ad::Tensor one_hot(std::span<const int> labels, int classes);

// Plain SGD with per-epoch learning-rate decay. Deterministic given cfg.seed.
TrainResult train(Network model, const Dataset& data, const TrainConfig& cfg, const Augment& augment = nullptr);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted class

  double macro_f1() const;
};

EvalReport report_from_confusion(const Eigen::MatrixXi& confusion);
EvalReport report_from_predictions(std::span<const int> labels, std::span<const int> predictions, int classes);
EvalReport evaluate(const Network& model, const Dataset& data);

}  // namespace biaslab
