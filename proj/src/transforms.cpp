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

#include "biaslab/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "biaslab/errors.hpp"
#include "biaslab/random.hpp"

namespace biaslab {
namespace {

// Soft disk of radius r at (x, y); keeps the max coverage.
void dab(Image& alpha, double x, double y, double r) {
  const int y0 = std::max(0, static_cast<int>(std::floor(y - r - 1)));
  const int y1 = std::min<int>(alpha.rows() - 1, static_cast<int>(std::ceil(y + r + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(x - r - 1)));
  const int x1 = std::min<int>(alpha.cols() - 1, static_cast<int>(std::ceil(x + r + 1)));
  for (int py = y0; py <= y1; ++py)
    for (int px = x0; px <= x1; ++px) {
      const double d = std::hypot(px + 0.5 - x, py + 0.5 - y);
      const double a = std::clamp(r + 0.5 - d, 0.0, 1.0);
      alpha(py, px) = std::max(alpha(py, px), a);
    }
}

void stroke(Image& alpha, double x0, double y0, double x1, double y1, double r) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 3)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    dab(alpha, x0 + t * (x1 - x0), y0 + t * (y1 - y0), r);
  }
}

// Quadratic Bézier strand.
void strand(Image& alpha, Rng& rng, double length, double r) {
  const double cx = alpha.cols() / 2.0, cy = alpha.rows() / 2.0;
  const double theta = uniform(rng, 0, std::numbers::pi);
  const double mx = cx + uniform(rng, -0.3, 0.3) * alpha.cols();
  const double my = cy + uniform(rng, -0.3, 0.3) * alpha.rows();
  const double dx = std::cos(theta) * length / 2, dy = std::sin(theta) * length / 2;
  const double ax = mx - dx, ay = my - dy, bx = mx + dx, by = my + dy;
  const double bend = uniform(rng, -0.35, 0.35) * length;
  const double qx = mx - std::sin(theta) * bend, qy = my + std::cos(theta) * bend;
  const int steps = std::max(4, static_cast<int>(length * 3));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double u = 1 - t;
    dab(alpha, u * u * ax + 2 * u * t * qx + t * t * bx, u * u * ay + 2 * u * t * qy + t * t * by, r);
  }
}

Stamp make_ruler(int side, Rng& rng) {
  const int length = static_cast<int>(std::round(side * uniform(rng, 0.5, 0.8)));
  const int height = 8;
  Image alpha = Image::Zero(height, length);
  const double base = uniform(rng, 5.5, 6.5);
  const double offset = uniform(rng, 0.5, 2.0);
  const double spacing = uniform(rng, 2.8, 4.2);
  const int major = uniform_int(rng, 4, 5);
  stroke(alpha, 0.5, base, length - 0.5, base, 0.5);
  int i = 0;
  for (double x = offset; x < length - 1; x += spacing, ++i) {
    const double tick = (i % major == 0) ? 5.0 : 2.5;
    stroke(alpha, x, base, x, base - tick, 0.35);
  }
  return Stamp{StampKind::kRuler, alpha, uniform(rng, 0.1, 0.2)};
}

Stamp make_hair(int side, Rng& rng, StampKind kind) {
  Image alpha = Image::Zero(side, side);
  int strands = 0;
  double lo = 0, hi = 0;
  switch (kind) {
    case StampKind::kHairShort: strands = uniform_int(rng, 1, 2); lo = 0.2; hi = 0.35; break;
    case StampKind::kHairMedium: strands = uniform_int(rng, 3, 5); lo = 0.4; hi = 0.7; break;
    default: strands = uniform_int(rng, 12, 16); lo = 0.7; hi = 1.0; break;
  }
  for (int i = 0; i < strands; ++i) strand(alpha, rng, side * uniform(rng, lo, hi), 0.45);
  return Stamp{kind, alpha, uniform(rng, 0.06, 0.16)};
}

double sample_width(Rng& rng, const FrameParams& p) {
  return p.max_width > p.min_width ? uniform(rng, p.min_width, p.max_width) : p.min_width;
}

}  // namespace

std::string_view stamp_kind_name(StampKind k) {
  switch (k) {
    case StampKind::kRuler: return "ruler";
    case StampKind::kHairShort: return "hair_short";
    case StampKind::kHairMedium: return "hair_medium";
    case StampKind::kHairDense: return "hair_dense";
  }
  return "ruler";
}

StampBank StampBank::build(int side, std::uint64_t seed, int per_kind) {
  if (side < 4 || per_kind < 1) throw std::invalid_argument("stamp bank: side >= 4 and per_kind >= 1 required");
  Rng rng(mix_seed(seed, 0x57a3b));
  StampBank bank;
  for (int i = 0; i < per_kind; ++i) bank.rulers.push_back(make_ruler(side, rng));
  for (StampKind k : {StampKind::kHairShort, StampKind::kHairMedium, StampKind::kHairDense})
    for (int i = 0; i < per_kind; ++i) bank.hairs.push_back(make_hair(side, rng, k));
  return bank;
}

Image round_frame(const Image& img, double width) {
  Image out = img;
  const double cx = img.cols() / 2.0, cy = img.rows() / 2.0;
  const double radius = std::hypot(cx, cy) * (1.0 - std::clamp(width, 0.0, 1.0));
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x)
      if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) >= radius) out(y, x) = 0.0;
  return out;
}

Image rect_frame(const Image& img, double width) {
  Image out = img;
  const int band = static_cast<int>(std::round(std::clamp(width, 0.0, 1.0) * img.rows() / 2.0));
  if (band > 0) {
    out.topRows(band).setZero();
    out.bottomRows(band).setZero();
  }
  return out;
}

Image insert_frame(const Image& img, std::uint64_t seed, const FrameParams& params) {
  Rng rng(mix_seed(seed, 0xf4a3e));
  FrameShape shape = params.shape;
  if (shape == FrameShape::kMixed) shape = bernoulli(rng, 0.5) ? FrameShape::kRound : FrameShape::kRect;
  const double width = sample_width(rng, params);
  return shape == FrameShape::kRound ? round_frame(img, width) : rect_frame(img, width);
}

Image composite_stamp(const Image& img, const Stamp& stamp, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xc0de));
  const double theta = uniform(rng, 0, 2 * std::numbers::pi);
  const double c = std::cos(theta), s = std::sin(theta);
  const double sh = stamp.alpha.rows(), sw = stamp.alpha.cols();
  const double bh = std::abs(sh * c) + std::abs(sw * s);
  const double bw = std::abs(sw * c) + std::abs(sh * s);
  // Centre of the rotated stamp lands somewhere inside the image.
  const double px = uniform(rng, 0, img.cols()), py = uniform(rng, 0, img.rows());
  Image out = img;
  const int x0 = std::max(0, static_cast<int>(std::floor(px - bw / 2)));
  const int x1 = std::min<int>(img.cols() - 1, static_cast<int>(std::ceil(px + bw / 2)));
  const int y0 = std::max(0, static_cast<int>(std::floor(py - bh / 2)));
  const int y1 = std::min<int>(img.rows() - 1, static_cast<int>(std::ceil(py + bh / 2)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // Inverse rotation into stamp coordinates.
      const double dx = x + 0.5 - px, dy = y + 0.5 - py;
      const double sx = c * dx + s * dy + sw / 2 - 0.5;
      const double sy = -s * dx + c * dy + sh / 2 - 0.5;
      const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
      const double fx = sx - ix, fy = sy - iy;
      auto at = [&](int yy, int xx) {
        return (yy >= 0 && yy < sh && xx >= 0 && xx < sw) ? stamp.alpha(yy, xx) : 0.0;
      };
      const double a = (1 - fy) * ((1 - fx) * at(iy, ix) + fx * at(iy, ix + 1)) +
                       fy * ((1 - fx) * at(iy + 1, ix) + fx * at(iy + 1, ix + 1));
      if (a > 0) out(y, x) = std::clamp((1 - a) * img(y, x) + a * stamp.ink, 0.0, 1.0);
    }
  }
  return out;
}

Image insert_ruler(const Image& img, const StampBank& bank, std::uint64_t seed) {
  if (bank.rulers.empty()) throw std::invalid_argument("insert_ruler: empty stamp bank");
  Rng rng(mix_seed(seed, 0x7a1e));
  const auto& stamp = bank.rulers[uniform_int(rng, 0, static_cast<int>(bank.rulers.size()) - 1)];
  return composite_stamp(img, stamp, rng());
}

Image insert_hair(const Image& img, const StampBank& bank, std::uint64_t seed) {
  if (bank.hairs.empty()) throw std::invalid_argument("insert_hair: empty stamp bank");
  Rng rng(mix_seed(seed, 0x4a12));
  const auto& stamp = bank.hairs[uniform_int(rng, 0, static_cast<int>(bank.hairs.size()) - 1)];
  return composite_stamp(img, stamp, rng());
}

Image draw_ring(const Image& img, int cx, int cy, int radius, double intensity) {
  Image out = img;
  if (radius <= 0) return out;
  auto plot = [&](int x, int y) {
    if (x >= 0 && x < out.cols() && y >= 0 && y < out.rows()) out(y, x) = intensity;
  };
  int x = radius, y = 0, err = 1 - radius;
  while (x >= y) {
    plot(cx + x, cy + y); plot(cx + y, cy + x); plot(cx - y, cy + x); plot(cx - x, cy + y);
    plot(cx - x, cy - y); plot(cx - y, cy - x); plot(cx + y, cy - x); plot(cx + x, cy - y);
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
  return out;
}

Image insert_circle(const Image& img, std::uint64_t seed, const CircleParams& params) {
  Rng rng(mix_seed(seed, 0xc1c1e));
  const double side = std::min(img.rows(), img.cols());
  const int radius = static_cast<int>(std::round(side * (params.max_radius > params.min_radius
                                                             ? uniform(rng, params.min_radius, params.max_radius)
                                                             : params.min_radius)));
  const int cx = uniform_int(rng, 0, static_cast<int>(img.cols()) - 1);
  const int cy = uniform_int(rng, 0, static_cast<int>(img.rows()) - 1);
  return draw_ring(img, cx, cy, radius, std::clamp(params.intensity, 0.0, 1.0));
}

Image cover_object(const Image& img, const Annotation& annotation) {
  if (!annotation.object) throw DataError("cover_object: annotation has no object region");
  const auto& o = *annotation.object;
  Image out = img;
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x)
      if (std::hypot(x + 0.5 - o.cx, y + 0.5 - o.cy) <= o.radius) out(y, x) = 1.0;
  return out;
}

std::string_view transform_name(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kFrame: return "frame";
    case TransformKind::kRuler: return "ruler";
    case TransformKind::kHair: return "hair";
    case TransformKind::kCircle: return "circle";
    case TransformKind::kCoverObject: return "cover_object";
  }
  return "identity";
}

TransformKind parse_transform(std::string_view s) {
  for (TransformKind k : {TransformKind::kIdentity, TransformKind::kFrame, TransformKind::kRuler, TransformKind::kHair,
                          TransformKind::kCircle, TransformKind::kCoverObject})
    if (transform_name(k) == s) return k;
  throw std::invalid_argument("unknown transform '" + std::string(s) + "'");
}

Image BiasTransform::apply(const Image& img, std::uint64_t seed, const Annotation* annotation) const {
  switch (kind) {
    case TransformKind::kIdentity: return img;
    case TransformKind::kFrame: return insert_frame(img, seed, frame);
    case TransformKind::kCircle: return insert_circle(img, seed, circle);
    case TransformKind::kRuler:
    case TransformKind::kHair:
      if (!stamps) throw std::invalid_argument(std::string(transform_name(kind)) + ": no stamp bank attached");
      return kind == TransformKind::kRuler ? insert_ruler(img, *stamps, seed) : insert_hair(img, *stamps, seed);
    case TransformKind::kCoverObject:
      if (!annotation) throw DataError("cover_object: no annotation supplied");
      return cover_object(img, *annotation);
  }
  return img;
}

bool BiasTransform::marks(Artifact* artifact) const {
  switch (kind) {
    case TransformKind::kFrame: *artifact = Artifact::kFrame; return true;
    case TransformKind::kRuler: *artifact = Artifact::kRuler; return true;
    case TransformKind::kHair: *artifact = Artifact::kHair; return true;
    case TransformKind::kCircle: *artifact = Artifact::kCircle; return true;
    default: return false;
  }
}

}  // namespace biaslab
