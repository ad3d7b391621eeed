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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/image.hpp"

namespace biaslab {

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

// Where the lesion-like object sits; emitted by the generator.
struct ObjectRegion {
  double cx = 0;
  double cy = 0;
  double radius = 0;
};

struct Annotation {
  bool frame = false;
  bool ruler = false;
  bool hair = false;
  bool circle = false;
  std::optional<ObjectRegion> object;
};

enum class Artifact { kFrame, kRuler, kHair, kCircle };
inline constexpr Artifact kAllArtifacts[] = {Artifact::kFrame, Artifact::kRuler, Artifact::kHair,
                                             Artifact::kCircle};
std::string_view artifact_name(Artifact a);
Artifact parse_artifact(std::string_view s);
bool has_artifact(const Annotation& a, Artifact kind);
void set_artifact(Annotation& a, Artifact kind, bool value);

struct Sample {
  std::string id;
  Image image;
  int label = 0;
  Split split = Split::kTrain;
  Annotation annotation;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 2;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Dataset subset(Split split) const;
  Dataset with_label(int label) const;
  std::vector<Image> images() const;
  std::vector<int> labels() const;
};

}  // namespace biaslab
