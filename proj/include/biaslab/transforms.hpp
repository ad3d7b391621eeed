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

// Artifact insertion transforms. Every transform is a pure function of
// (image, seed, parameters) and keeps pixel values in [0, 1].

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/dataset.hpp"
#include "biaslab/image.hpp"

namespace biaslab {

enum class FrameShape { kRound, kRect, kMixed };

struct FrameParams {
  FrameShape shape = FrameShape::kRound;
  // Round: fraction of the half-diagonal that is blacked out from the
  // border inwards. Rect: band height as a fraction of half the side.
  double min_width = 0.22;
  double max_width = 0.38;
};

struct CircleParams {
  double min_radius = 0.12;  // fraction of the side
  double max_radius = 0.3;
  double intensity = 0.96;
};

enum class StampKind { kRuler, kHairShort, kHairMedium, kHairDense };
std::string_view stamp_kind_name(StampKind k);

struct Stamp {
  StampKind kind;
  Image alpha;       // coverage in [0, 1]
  double ink = 0.1;  // composited intensity
};

// Procedural rulers (tick-mark strips) and hair (curved dark strands at
// three densities). Banks built from different seeds share no stamps.
struct StampBank {
  std::vector<Stamp> rulers;
  std::vector<Stamp> hairs;

  static StampBank build(int side, std::uint64_t seed, int per_kind = 8);
};

Image insert_frame(const Image& img, std::uint64_t seed, const FrameParams& params = {});
// Round frame at an explicit width fraction; width 0 is the identity and 1
// blacks out the whole image.
Image round_frame(const Image& img, double width);
Image rect_frame(const Image& img, double width);

// Alpha-composites one randomly chosen, randomly rotated stamp.
Image composite_stamp(const Image& img, const Stamp& stamp, std::uint64_t seed);
Image insert_ruler(const Image& img, const StampBank& bank, std::uint64_t seed);
Image insert_hair(const Image& img, const StampBank& bank, std::uint64_t seed);

Image insert_circle(const Image& img, std::uint64_t seed, const CircleParams& params = {});
// Midpoint-circle ring of integer radius at an integer centre.
Image draw_ring(const Image& img, int cx, int cy, int radius, double intensity);

// Sets the annotated object disk to 1.0. Throws DataError if the
// annotation carries no object.
Image cover_object(const Image& img, const Annotation& annotation);

enum class TransformKind { kIdentity, kFrame, kRuler, kHair, kCircle, kCoverObject };
std::string_view transform_name(TransformKind k);
TransformKind parse_transform(std::string_view s);

struct BiasTransform {
  TransformKind kind = TransformKind::kIdentity;
  FrameParams frame;
  CircleParams circle;
  std::shared_ptr<const StampBank> stamps;  // ruler / hair

  Image apply(const Image& img, std::uint64_t seed, const Annotation* annotation = nullptr) const;
  // Which annotation flag the transform sets, if any.
  bool marks(Artifact* artifact) const;
};

}  // namespace biaslab
