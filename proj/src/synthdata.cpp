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

#include "biaslab/synthdata.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "biaslab/io.hpp"
#include "biaslab/log.hpp"
#include "biaslab/random.hpp"
#include "json.hpp"

namespace biaslab {
namespace {

void check_style(const BlobStyle& s, const char* which) {
  auto range = [&](double lo, double hi, const char* what) {
    if (!(lo >= 0 && lo <= hi))
      throw std::invalid_argument(std::string("generator: ") + which + " " + what + " range is invalid");
  };
  range(s.radius_min, s.radius_max, "radius");
  range(s.irregularity_min, s.irregularity_max, "irregularity");
  range(s.texture_min, s.texture_max, "texture");
  if (s.radius_max > 0.5) throw std::invalid_argument(std::string("generator: ") + which + " radius above 0.5");
}

double draw(Rng& rng, double lo, double hi) { return hi > lo ? uniform(rng, lo, hi) : lo; }

// Planting order: stamps first, the circle, and the frame last so that a
// frame always owns the corners.
constexpr Artifact kPlantOrder[] = {Artifact::kHair, Artifact::kRuler, Artifact::kCircle, Artifact::kFrame};

}  // namespace

void GeneratorSpec::validate() const {
  if (n_per_class < 0) throw std::invalid_argument("generator: n_per_class must be >= 0");
  if (side < 8 || side % 4 != 0) throw std::invalid_argument("generator: side must be a multiple of 4 and >= 8");
  check_style(class0, "class0");
  check_style(class1, "class1");
  for (const auto& [a, rate] : plan)
    for (double p : {rate.p_class0, rate.p_class1})
      if (!(p >= 0 && p <= 1))
        throw std::invalid_argument("generator: probability for " + std::string(artifact_name(a)) + " outside [0,1]");
  if (!(train_fraction >= 0 && val_fraction >= 0 && train_fraction + val_fraction <= 1))
    throw std::invalid_argument("generator: split fractions must be non-negative and sum to at most 1");
}

std::map<Artifact, ArtifactRate> GeneratorSpec::no_artifacts() {
  std::map<Artifact, ArtifactRate> plan;
  for (Artifact a : kAllArtifacts) plan[a] = {0, 0};
  return plan;
}

StampBank generator_stamps(int side, std::uint64_t seed, bool train_bank) {
  return StampBank::build(side, mix_seed(seed, train_bank ? 0xba1 : 0xba2));
}

Image render_blob(int side, const BlobStyle& style, std::uint64_t seed, ObjectRegion* object) {
  Rng rng(seed);
  const double background = uniform(rng, 0.62, 0.78);
  double fx[3], fy[3], ph[3];
  for (int i = 0; i < 3; ++i) {
    fx[i] = uniform(rng, -2, 2) * 2 * std::numbers::pi / side;
    fy[i] = uniform(rng, -2, 2) * 2 * std::numbers::pi / side;
    ph[i] = uniform(rng, 0, 2 * std::numbers::pi);
  }
  const double radius = draw(rng, style.radius_min, style.radius_max) * side;
  const double cx = side / 2.0 + std::clamp(normal(rng, 0, 0.04 * side), -0.1 * side, 0.1 * side);
  const double cy = side / 2.0 + std::clamp(normal(rng, 0, 0.04 * side), -0.1 * side, 0.1 * side);
  const double irregularity = draw(rng, style.irregularity_min, style.irregularity_max);
  double amp[6], phase[6], amp_sum = 0;
  for (int k = 0; k < 6; ++k) {
    amp[k] = irregularity * uniform(rng, 0.4, 1.0) / std::sqrt(k + 1.0);
    phase[k] = uniform(rng, 0, 2 * std::numbers::pi);
    amp_sum += amp[k];
  }
  const double lesion = uniform(rng, 0.22, 0.4);
  const double texture = draw(rng, style.texture_min, style.texture_max);
  struct Spot { double x, y, sigma, a; };
  std::vector<Spot> spots(8);
  for (auto& s : spots) {
    const double r = radius * std::sqrt(uniform(rng));
    const double t = uniform(rng, 0, 2 * std::numbers::pi);
    s = {cx + r * std::cos(t), cy + r * std::sin(t), radius * uniform(rng, 0.12, 0.3),
         texture * (bernoulli(rng, 0.5) ? 1.0 : -1.0)};
  }
  Image img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double bg = background;
      for (int i = 0; i < 3; ++i) bg += 0.025 * std::cos(fx[i] * px + fy[i] * py + ph[i]);
      const double dx = px - cx, dy = py - cy;
      const double dist = std::hypot(dx, dy), theta = std::atan2(dy, dx);
      double edge = 1;
      for (int k = 0; k < 6; ++k) edge += amp[k] * std::sin((k + 2) * theta + phase[k]);
      const double alpha = 1 / (1 + std::exp(-(radius * edge - dist) / 0.8));
      double inner = lesion;
      for (const auto& s : spots)
        inner += s.a * std::exp(-((px - s.x) * (px - s.x) + (py - s.y) * (py - s.y)) / (2 * s.sigma * s.sigma));
      img(y, x) = std::clamp((1 - alpha) * bg + alpha * inner + normal(rng, 0, 0.012), 0.0, 1.0);
    }
  }
  if (object) *object = {cx, cy, radius * (1 + amp_sum)};
  return img;
}

Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  const auto bank = std::make_shared<const StampBank>(generator_stamps(spec.side, spec.seed));
  Dataset data;
  data.num_classes = 2;
  const int n = spec.n_per_class;
  data.samples.resize(2 * static_cast<std::size_t>(n));
  for (int c = 0; c < 2; ++c) {
    // Seeded split within each class.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(mix_seed(spec.seed, 0x5b11, c));
    std::shuffle(order.begin(), order.end(), split_rng);
    const int n_train = static_cast<int>(std::lround(n * spec.train_fraction));
    const int n_val = std::min(n - n_train, static_cast<int>(std::lround(n * spec.val_fraction)));
    std::vector<Split> split(n);
    for (int r = 0; r < n; ++r) split[order[r]] = r < n_train ? Split::kTrain : r < n_train + n_val ? Split::kVal : Split::kTest;

    for (int i = 0; i < n; ++i) {
      const int index = c * n + i;
      const std::uint64_t item_seed = mix_seed(spec.seed, index);
      Sample& s = data.samples[index];
      char id[32];
      std::snprintf(id, sizeof id, "img_%05d", index);
      s.id = id;
      s.label = c;
      s.split = split[i];
      ObjectRegion object;
      s.image = render_blob(spec.side, c == 0 ? spec.class0 : spec.class1, mix_seed(item_seed, 0xb10b), &object);
      s.annotation.object = object;
      Rng art_rng(mix_seed(item_seed, 0xa27));
      for (Artifact a : kPlantOrder) {
        const auto it = spec.plan.find(a);
        const double p = it == spec.plan.end() ? 0.0 : (c == 0 ? it->second.p_class0 : it->second.p_class1);
        const bool present = bernoulli(art_rng, p);
        const std::uint64_t t_seed = art_rng();
        if (!present) continue;
        BiasTransform t;
        t.frame = spec.frame;
        t.circle = spec.circle;
        t.stamps = bank;
        switch (a) {
          case Artifact::kFrame: t.kind = TransformKind::kFrame; break;
          case Artifact::kRuler: t.kind = TransformKind::kRuler; break;
          case Artifact::kHair: t.kind = TransformKind::kHair; break;
          case Artifact::kCircle: t.kind = TransformKind::kCircle; break;
        }
        s.image = t.apply(s.image, t_seed);
        set_artifact(s.annotation, a, true);
      }
      s.image = io::quantize8(s.image);
    }
  }
  return data;
}

double artifact_ratio(long with_artifact, long class_size) {
  if (class_size <= 0) throw std::invalid_argument("artifact_ratio: empty class");
  if (with_artifact < 0 || with_artifact > class_size)
    throw std::invalid_argument("artifact_ratio: count exceeds class size");
  return static_cast<double>(with_artifact) / static_cast<double>(class_size);
}

double artifact_ratio(const Dataset& data, Artifact artifact, int label) {
  long total = 0, hits = 0;
  for (const auto& s : data.samples) {
    if (s.label != label) continue;
    ++total;
    hits += has_artifact(s.annotation, artifact);
  }
  if (total == 0) throw std::invalid_argument("artifact_ratio: class " + std::to_string(label) + " is empty");
  return artifact_ratio(hits, total);
}

ClassRatio class_ratio(double ratio_class1, double ratio_class0) {
  if (ratio_class0 <= 0) {
    warn("class_ratio: class-0 artifact ratio is zero; reporting +infinity");
    return {std::numeric_limits<double>::infinity(), true};
  }
  return {ratio_class1 / ratio_class0, false};
}

ClassRatio class_ratio(const Dataset& data, Artifact artifact) {
  return class_ratio(artifact_ratio(data, artifact, 1), artifact_ratio(data, artifact, 0));
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const long n = static_cast<long>(x.size());
  if (n < 3) throw std::invalid_argument("pearson: need at least 3 observations");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (long i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::invalid_argument("pearson: a variable is constant");
  PearsonResult res;
  res.n = n;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(res.r) >= 1.0 || df == 0) {
    res.p_value = std::abs(res.r) >= 1.0 ? 0.0 : 1.0;
  } else {
    const double t2 = res.r * res.r * df / (1 - res.r * res.r);
    // Two-sided tail of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
    res.p_value = boost::math::ibeta(df / 2, 0.5, df / (df + t2));
  }
  return res;
}

PearsonResult pearson(const Dataset& data, Artifact artifact) {
  std::vector<double> x, y;
  for (const auto& s : data.samples) {
    x.push_back(has_artifact(s.annotation, artifact) ? 1.0 : 0.0);
    y.push_back(s.label);
  }
  return pearson(x, y);
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cohens_kappa: length mismatch");
  if (a.empty()) throw std::invalid_argument("cohens_kappa: no ratings");
  std::map<int, long> ca, cb;
  long agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    agree += a[i] == b[i];
  }
  // Integer form: (n*agree - sum na*nb) / (n^2 - sum na*nb).
  const long n = static_cast<long>(a.size());
  long chance = 0;
  for (const auto& [k, na] : ca) {
    const auto it = cb.find(k);
    if (it != cb.end()) chance += na * it->second;
  }
  if (chance == n * n) throw std::invalid_argument("cohens_kappa: chance agreement is 1 (degenerate marginals)");
  return static_cast<double>(n * agree - chance) / static_cast<double>(n * n - chance);
}

StatsReport compute_stats(const Dataset& data) {
  StatsReport r;
  for (const auto& s : data.samples) (s.label == 1 ? r.size_class1 : r.size_class0) += 1;
  if (r.size_class0 == 0 || r.size_class1 == 0) throw std::invalid_argument("stats: both classes must be present");
  for (Artifact a : kAllArtifacts) {
    ArtifactStats st;
    st.artifact = a;
    for (const auto& s : data.samples)
      if (has_artifact(s.annotation, a)) (s.label == 1 ? st.count_class1 : st.count_class0) += 1;
    st.ratio_class0 = artifact_ratio(st.count_class0, r.size_class0);
    st.ratio_class1 = artifact_ratio(st.count_class1, r.size_class1);
    const long present = st.count_class0 + st.count_class1;
    st.ratio_defined = present > 0;
    if (st.ratio_defined) st.class_ratio = class_ratio(st.ratio_class1, st.ratio_class0);
    st.correlation_defined = present > 0 && present < static_cast<long>(data.size()) && data.size() >= 3;
    if (st.correlation_defined) st.correlation = pearson(data, a);
    r.artifacts.push_back(st);
  }
  return r;
}

std::string stats_to_json(const StatsReport& report) {
  nlohmann::ordered_json j;
  j["size_class0"] = report.size_class0;
  j["size_class1"] = report.size_class1;
  for (const auto& st : report.artifacts) {
    nlohmann::ordered_json a;
    a["artifact"] = artifact_name(st.artifact);
    a["count_class0"] = st.count_class0;
    a["count_class1"] = st.count_class1;
    a["ratio_class0"] = st.ratio_class0;
    a["ratio_class1"] = st.ratio_class1;
    if (!st.ratio_defined)
      a["class_ratio"] = nullptr;
    else if (st.class_ratio.infinite)
      a["class_ratio"] = "inf";
    else
      a["class_ratio"] = st.class_ratio.value;
    if (st.correlation_defined) {
      a["pearson_r"] = st.correlation.r;
      a["p_value"] = st.correlation.p_value;
    } else {
      a["pearson_r"] = nullptr;
      a["p_value"] = nullptr;
    }
    j["artifacts"].push_back(a);
  }
  return j.dump(2);
}

}  // namespace biaslab
