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

// Bias mitigation: targeted data augmentation (TDA) and attribution-feedback
// fine-tuning that teaches a model to ignore an artifact.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "biaslab/attribution.hpp"
#include "biaslab/cbi.hpp"
#include "biaslab/dataset.hpp"
#include "biaslab/network.hpp"
#include "biaslab/training.hpp"
#include "biaslab/transforms.hpp"

namespace biaslab {

struct PolicyEntry {
  BiasTransform transform;
  double probability = 0;
};

// Entries fire independently. Fired transforms run in a fixed stage order:
// stamps (hair, ruler), then circle, then frame, whatever the entry order.
struct AugmentationPolicy {
  std::vector<PolicyEntry> entries;

  void validate() const;
  static AugmentationPolicy single(BiasTransform transform, double probability);
};

// `fired`, when given, receives one flag per entry.
Image apply_policy(const Image& image, const AugmentationPolicy& policy, std::uint64_t seed,
                   std::vector<bool>* fired = nullptr);

TrainResult tda_train(Network model, const Dataset& data, const AugmentationPolicy& policy, const TrainConfig& cfg);

struct TdaEvaluation {
  EvalReport original;
  EvalReport augmented;
  double f1_org = 0;
  double f1_aug = 0;
  double f1_mean = 0;
  CbiReport cbi;
};

// Scores the clean test set and a copy with `transform` inserted into every
// image. The copy uses the same per-sample seeds as the CBI run.
TdaEvaluation tda_evaluate(const Network& model, const Dataset& test, const BiasTransform& transform,
                           std::uint64_t seed = 0);

struct TdaSweepRow {
  std::string policy;
  double probability = 0;
  std::uint64_t seed = 0;
  double f1_org = 0;
  double f1_aug = 0;
  double f1_mean = 0;
  long switched = 0;
  double mean_change = 0;
  double median_change = 0;
  double max_change = 0;
};

struct TdaSweepConfig {
  std::vector<double> probabilities{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1};
  TrainConfig train;
};

using ModelFactory = std::function<Network(std::uint64_t seed)>;

// One trained model per (p, seed). `train_transform` and `test_transform`
// should draw stamps from disjoint banks.
std::vector<TdaSweepRow> tda_sweep(const ModelFactory& init, const Dataset& train, const Dataset& test,
                                   const BiasTransform& train_transform, const BiasTransform& test_transform,
                                   const TdaSweepConfig& cfg);

std::string tda_sweep_csv(const std::vector<TdaSweepRow>& rows);

// Mean squared difference over every element.
double attribution_loss(const AttributionMap& original, const AttributionMap& biased);
ad::Var attribution_loss(ad::Var original, ad::Var biased);

enum class ClsInput { kOriginal, kBiased };

struct FeedbackConfig {
  double alpha = 0.5;
  TrainConfig train{.epochs = 2, .learning_rate = 0.02};
  BiasTransform transform;          // the artifact to ignore
  ClsInput cls_input = ClsInput::kBiased;
  // Divide both maps by the RMS of the frozen clean map of the batch, so the
  // attribution term is scale-free and comparable to the cross-entropy.
  bool normalize_maps = true;

  void validate() const;
};

struct FeedbackResult {
  Network model;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_cls;
  std::vector<double> epoch_atr;
  int updates = 0;
};

// Loss = (1 - alpha) * cross-entropy + alpha * attribution loss. The target
// map is the signed saliency of the clean image, frozen per batch; gradients
// flow through the saliency of the transformed image. Batch order and
// per-sample seeds match train().
FeedbackResult feedback_finetune(Network model, const Dataset& data, const FeedbackConfig& cfg);

// Held-out attribution loss of `model` under `transform`, targets = labels.
// With `normalize`, divided by the mean square of the clean maps.
double mean_attribution_loss(const Network& model, const Dataset& data, const BiasTransform& transform,
                             std::uint64_t seed = 0, bool normalize = false, int batch_size = 64);

}  // namespace biaslab
