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

// Local explanations (saliency, occlusion, LRP-epsilon) and metrics that
// score explanations.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "biaslab/autodiff.hpp"
#include "biaslab/image.hpp"
#include "biaslab/network.hpp"

namespace biaslab {

struct AttributionMap {
  Image values;         // non-negative magnitudes, same shape as the image
  Image signed_values;  // before taking magnitudes
  std::string source_id;
  int target_class = 0;
};

// d logit_target / d x on the tape; the result can be differentiated again.
// x: [N,1,R,C]; one target per row.
ad::Var signed_saliency(ad::Tape& tape, const Network& net, const BoundParams& params, ad::Var x,
                        std::span<const int> targets);

// Signed gradients for many images, batched.
std::vector<Image> saliency_batch(const Network& net, std::span<const Image> images, std::span<const int> targets,
                                  int batch_size = 64);

AttributionMap saliency(const Network& net, const Image& image, int target, std::string id = {});

// Score drop when a zeroed patch_side square covers each pixel, averaged
// over the patches covering it. The last row/column of patches is aligned
// to the border so every pixel is covered. `evaluations` receives the
// number of occluded forward passes.
AttributionMap occlusion(const Network& net, const Image& image, int target, int patch_side, int stride,
                         int* evaluations = nullptr);

struct LrpConfig {
  double epsilon = 1e-6;
  double gamma = 0.0;
  void validate() const;
};

// Epsilon rule with rho(w) = w + gamma * max(0, w). Biases are left out of
// the denominators so relevance is conserved up to epsilon; max pooling
// sends relevance to the forward winner.
AttributionMap lrp_epsilon(const Network& net, const Image& image, int target, const LrpConfig& cfg = {});

// Metric plumbing: an explanation phi(x) and a scalar score f(x) for a
// fixed model and target.
using Explainer = std::function<Image(const Image&)>;
using ScoreFn = std::function<double(const Image&)>;
// Explanation of `image` for `target` under `net`; used by the contrast
// metrics that compare models.
using AttributionFn = std::function<Image(const Network& net, const Image& image, int target)>;

Explainer signed_saliency_explainer(const Network& net, int target);
Explainer saliency_explainer(const Network& net, int target);  // magnitudes
ScoreFn logit_score(const Network& net, int target);
AttributionFn saliency_attribution();  // magnitudes

// Monte-Carlo max of ||phi(y) - phi(x)||_2 with y = clip(x + U[-r, r]).
// Later samples extend, never replace, earlier ones: the estimate is
// non-decreasing in `samples` for a fixed seed.
double max_sensitivity(const Explainer& phi, const Image& image, double radius, int samples, std::uint64_t seed);

enum class PerturbationKind { kNoisyBaseline, kSquareRemoval, kSubsetBaseline };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::kNoisyBaseline;
  double sigma = 0.1;             // noisy_baseline: I ~ N(0, sigma^2) per pixel
  int square_side = 4;            // square_removal: I zeroes one random square
  double subset_fraction = 0.5;   // subset_baseline: share of pixels sent to baseline
  Image baseline;                 // subset_baseline target; empty means zeros
  void validate() const;
};

// Random perturbation I such that x - I is the perturbed input.
Image sample_perturbation(const PerturbationSpec& spec, const Image& image, std::uint64_t seed);

// Monte-Carlo E[(I . phi(x) - (f(x) - f(x - I)))^2].
double infidelity(const Explainer& phi, const ScoreFn& f, const Image& image, const PerturbationSpec& spec,
                  int samples, std::uint64_t seed);

// G_c(model) = mean attribution mass inside the mask over images that both
// models classify correctly; returns G_c(a) - G_c(b).
double model_contrast_score(const AttributionFn& attr, const Network& model_a, const Network& model_b,
                            const Image& concept_mask, std::span<const Image> images, std::span<const int> labels);

struct FeaturePair {
  Image with_feature;
  Image without_feature;
  int label = 0;
};

// Share of pairs (both images classified correctly) whose mean attribution
// inside the mask is strictly lower with the feature than without it.
double input_dependence_rate(const AttributionFn& attr, const Network& model, std::span<const FeaturePair> pairs,
                             const Image& feature_mask);

}  // namespace biaslab
