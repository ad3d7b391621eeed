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

// Synthetic lesion-like grayscale data with planted artifact/class
// correlations, and the descriptive statistics used to audit it.

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "biaslab/dataset.hpp"
#include "biaslab/transforms.hpp"

namespace biaslab {

struct BlobStyle {
  double radius_min = 0.2;  // fraction of the side
  double radius_max = 0.3;
  double irregularity_min = 0.0;  // harmonic amplitude of the border
  double irregularity_max = 0.05;
  double texture_min = 0.0;  // contrast of interior blotches
  double texture_max = 0.05;
};

struct ArtifactRate {
  double p_class0 = 0;
  double p_class1 = 0;
};

struct GeneratorSpec {
  int n_per_class = 2000;
  int side = 48;
  BlobStyle class0{0.18, 0.3, 0.0, 0.06, 0.0, 0.06};
  BlobStyle class1{0.18, 0.3, 0.08, 0.2, 0.08, 0.2};
  std::map<Artifact, ArtifactRate> plan{{Artifact::kFrame, {0.1, 0.9}}};
  FrameParams frame;
  CircleParams circle;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  // Everything at zero probability.
  static std::map<Artifact, ArtifactRate> no_artifacts();
};

// Stamps used when planting ruler/hair artifacts in generated data. Audits
// should use train_bank = false so inserted stamps were never seen in
// training.
StampBank generator_stamps(int side, std::uint64_t seed, bool train_bank = true);

// Two classes, ids "img_00000"..., per-class seeded split into
// train/val/test. Images are quantized to 8 bits.
Dataset generate(const GeneratorSpec& spec);

// Renders the artifact-free blob for one sample.
Image render_blob(int side, const BlobStyle& style, std::uint64_t seed, ObjectRegion* object = nullptr);

// count(artifact and class) / count(class). Throws on an empty class.
double artifact_ratio(const Dataset& data, Artifact artifact, int label);
double artifact_ratio(long with_artifact, long class_size);

struct ClassRatio {
  double value = 0;
  bool infinite = false;  // class-0 ratio was zero
};
ClassRatio class_ratio(const Dataset& data, Artifact artifact);
ClassRatio class_ratio(double ratio_class1, double ratio_class0);

struct PearsonResult {
  double r = 0;
  double p_value = 1;
  long n = 0;
};
PearsonResult pearson(std::span<const double> x, std::span<const double> y);
PearsonResult pearson(const Dataset& data, Artifact artifact);

// Chance agreement from the product of marginals.
double cohens_kappa(std::span<const int> a, std::span<const int> b);

struct ArtifactStats {
  Artifact artifact;
  long count_class0 = 0;
  long count_class1 = 0;
  double ratio_class0 = 0;
  double ratio_class1 = 0;
  ClassRatio class_ratio;
  bool ratio_defined = false;  // false when no image carries the artifact
  PearsonResult correlation;
  bool correlation_defined = false;
};

struct StatsReport {
  long size_class0 = 0;
  long size_class1 = 0;
  std::vector<ArtifactStats> artifacts;
};

StatsReport compute_stats(const Dataset& data);
std::string stats_to_json(const StatsReport& report);

}  // namespace biaslab
