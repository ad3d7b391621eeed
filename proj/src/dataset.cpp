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

#include "biaslab/dataset.hpp"

#include <stdexcept>

namespace biaslab {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

std::string_view artifact_name(Artifact a) {
  switch (a) {
    case Artifact::kFrame: return "frame";
    case Artifact::kRuler: return "ruler";
    case Artifact::kHair: return "hair";
    case Artifact::kCircle: return "circle";
  }
  return "frame";
}

Artifact parse_artifact(std::string_view s) {
  for (Artifact a : kAllArtifacts)
    if (artifact_name(a) == s) return a;
  throw std::invalid_argument("unknown artifact '" + std::string(s) + "'");
}

bool has_artifact(const Annotation& a, Artifact kind) {
  switch (kind) {
    case Artifact::kFrame: return a.frame;
    case Artifact::kRuler: return a.ruler;
    case Artifact::kHair: return a.hair;
    case Artifact::kCircle: return a.circle;
  }
  return false;
}

void set_artifact(Annotation& a, Artifact kind, bool value) {
  switch (kind) {
    case Artifact::kFrame: a.frame = value; break;
    case Artifact::kRuler: a.ruler = value; break;
    case Artifact::kHair: a.hair = value; break;
    case Artifact::kCircle: a.circle = value; break;
  }
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  out.num_classes = num_classes;
  for (const auto& s : samples)
    if (s.split == split) out.samples.push_back(s);
  return out;
}

Dataset Dataset::with_label(int label) const {
  Dataset out;
  out.num_classes = num_classes;
  for (const auto& s : samples)
    if (s.label == label) out.samples.push_back(s);
  return out;
}

std::vector<Image> Dataset::images() const {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

}  // namespace biaslab
