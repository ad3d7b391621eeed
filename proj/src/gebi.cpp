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

#include "biaslab/gebi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "biaslab/embedding.hpp"
#include "biaslab/log.hpp"
#include "json.hpp"

namespace biaslab {
namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

Eigen::MatrixXd prepared(const std::vector<Image>& images, int side, bool equalize) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(images.size());
  for (const auto& img : images) rows.push_back(flatten(preprocess(img, side, equalize)));
  return stack(rows);
}

}  // namespace

std::string_view gebi_mode_name(GebiMode m) {
  switch (m) {
    case GebiMode::kSpray: return "spray";
    case GebiMode::kIsoSpray: return "iso_spray";
    case GebiMode::kGebi: return "gebi";
  }
  return "gebi";
}

GebiMode parse_gebi_mode(std::string_view s) {
  for (GebiMode m : {GebiMode::kSpray, GebiMode::kIsoSpray, GebiMode::kGebi})
    if (gebi_mode_name(m) == s) return m;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (spray, iso_spray, gebi)");
}

std::string_view explainer_name(ExplainerKind e) {
  switch (e) {
    case ExplainerKind::kSaliency: return "saliency";
    case ExplainerKind::kOcclusion: return "occlusion";
    case ExplainerKind::kLrp: return "lrp";
  }
  return "saliency";
}

ExplainerKind parse_explainer(std::string_view s) {
  for (ExplainerKind e : {ExplainerKind::kSaliency, ExplainerKind::kOcclusion, ExplainerKind::kLrp})
    if (explainer_name(e) == s) return e;
  throw std::invalid_argument("unknown explainer '" + std::string(s) + "' (saliency, occlusion, lrp)");
}

void GebiConfig::validate() const {
  if (image_dims < 1 || attribution_dims < 1) throw std::invalid_argument("gebi: dims must be >= 1");
  if (knn_k < 1) throw std::invalid_argument("gebi: knn_k must be >= 1");
  if (cluster_k < 0) throw std::invalid_argument("gebi: cluster_k must be >= 0 (0 selects automatically)");
  if (cluster_k == 0 && max_k < 2) throw std::invalid_argument("gebi: max_k must be >= 2");
  if (analysis_side < 2 || spray_side < 1) throw std::invalid_argument("gebi: analysis and spray sides must be positive");
  if (spray_side > analysis_side) throw std::invalid_argument("gebi: spray_side exceeds analysis_side");
  if (target_class < 0) throw std::invalid_argument("gebi: target_class must be >= 0");
  if (mode == GebiMode::kGebi && (attribution_dims < image_dims || attribution_dims > 3 * image_dims))
    warn("gebi: attribution_dims is usually about twice image_dims");
}

Image equalize_histogram(const Image& img) {
  const Eigen::Index n = img.size();
  if (n == 0) return img;
  auto bin = [](double v) { return std::clamp(static_cast<int>(std::floor(v * 256.0)), 0, 255); };
  std::array<long, 256> hist{};
  for (Eigen::Index i = 0; i < n; ++i) ++hist[bin(img.data()[i])];
  if (std::count_if(hist.begin(), hist.end(), [](long c) { return c > 0; }) <= 1) return img;
  std::array<double, 256> cdf{};
  long running = 0;
  for (int b = 0; b < 256; ++b) {
    running += hist[b];
    cdf[b] = static_cast<double>(running) / static_cast<double>(n);
  }
  Image out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.data()[i] = cdf[bin(img.data()[i])];
  return out;
}

Image stretch_contrast(const Image& img) {
  if (img.size() == 0) return img;
  const double lo = img.minCoeff(), hi = img.maxCoeff();
  if (!(hi > lo)) return img;
  return ((img.array() - lo) / (hi - lo)).matrix();
}

Image preprocess(const Image& img, int side, bool equalize) {
  Image r = (img.rows() == side && img.cols() == side) ? img : resize_bilinear(img, side, side);
  if (equalize) r = equalize_histogram(r);
  return stretch_contrast(r);
}

std::vector<Image> attribution_maps(const Network& model, const std::vector<Image>& images, int target,
                                    const GebiConfig& cfg) {
  std::vector<Image> maps;
  maps.reserve(images.size());
  switch (cfg.explainer) {
    case ExplainerKind::kSaliency: {
      const std::vector<int> targets(images.size(), target);
      for (auto& g : saliency_batch(model, images, targets)) maps.push_back(g.cwiseAbs());
      break;
    }
    case ExplainerKind::kOcclusion:
      for (const auto& img : images)
        maps.push_back(occlusion(model, img, target, cfg.occlusion_patch, cfg.occlusion_stride).values);
      break;
    case ExplainerKind::kLrp:
      for (const auto& img : images) maps.push_back(lrp_epsilon(model, img, target).values);
      break;
  }
  return maps;
}

Eigen::MatrixXd normalize_block(const Eigen::MatrixXd& block) {
  if (block.size() == 0) return block;
  Eigen::MatrixXd centered = block.rowwise() - block.colwise().mean();
  const double rms = std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size()));
  if (rms > 0) centered /= rms;
  return centered;
}

Eigen::MatrixXd build_embeddings(const Dataset& data, const Network& model, const GebiConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(data.size());
  if (n <= cfg.knn_k) throw std::invalid_argument("gebi: need more samples than knn_k neighbours");
  const auto images = data.images();
  const auto maps = attribution_maps(model, images, cfg.target_class, cfg);
  const Eigen::MatrixXd map_points = prepared(maps, cfg.analysis_side, cfg.equalize_maps);
  switch (cfg.mode) {
    case GebiMode::kSpray: {
      std::vector<Eigen::VectorXd> rows;
      for (const auto& m : maps) rows.push_back(downscale(preprocess(m, cfg.analysis_side, cfg.equalize_maps), cfg.spray_side));
      return stack(rows);
    }
    case GebiMode::kIsoSpray:
      return isomap(map_points, {cfg.knn_k, cfg.attribution_dims});
    case GebiMode::kGebi: {
      const Eigen::MatrixXd img = normalize_block(
          isomap(prepared(images, cfg.analysis_side, cfg.equalize_images), {cfg.knn_k, cfg.image_dims}));
      const Eigen::MatrixXd att = normalize_block(isomap(map_points, {cfg.knn_k, cfg.attribution_dims}));
      Eigen::MatrixXd out(n, img.cols() + att.cols());
      out << img, att;
      return out;
    }
  }
  return {};
}

ClusterReport summarize_clusters(const Dataset& data, const std::vector<int>& labels, int k, int min_cluster_size) {
  if (labels.size() != data.size()) throw std::invalid_argument("gebi: one cluster label per sample required");
  ClusterReport r;
  r.k = k;
  r.clusters.resize(k);
  std::vector<std::map<Artifact, long>> hits(k);
  for (int c = 0; c < k; ++c) r.clusters[c].index = c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& cl = r.clusters.at(labels[i]);
    const auto& s = data.samples[i];
    cl.ids.push_back(s.id);
    ++cl.class_counts[s.label];
    for (Artifact a : kAllArtifacts) hits[labels[i]][a] += has_artifact(s.annotation, a);
  }
  for (int c = 0; c < k; ++c)
    for (Artifact a : kAllArtifacts)
      r.clusters[c].artifact_frequency[a] =
          r.clusters[c].size() ? static_cast<double>(hits[c][a]) / static_cast<double>(r.clusters[c].size()) : 0.0;
  for (Artifact a : kAllArtifacts) {
    ArtifactPurity p;
    for (int c = 0; c < k; ++c) {
      if (static_cast<int>(r.clusters[c].size()) < min_cluster_size) continue;
      if (p.best_cluster < 0 || r.clusters[c].artifact_frequency[a] > p.best) {
        p.best = r.clusters[c].artifact_frequency[a];
        p.best_cluster = c;
      }
    }
    long rest_size = 0, rest_hits = 0;
    for (int c = 0; c < k; ++c) {
      if (c == p.best_cluster) continue;
      rest_size += static_cast<long>(r.clusters[c].size());
      rest_hits += hits[c][a];
    }
    p.remaining = rest_size ? static_cast<double>(rest_hits) / static_cast<double>(rest_size) : 0.0;
    r.purity[a] = p;
  }
  return r;
}

ClusterReport run_gebi(const Dataset& data, const Network& model, const GebiConfig& cfg) {
  const Eigen::MatrixXd points = build_embeddings(data, model, cfg);
  const int n = static_cast<int>(points.rows());
  int k = cfg.cluster_k;
  if (k == 0) k = select_k(points, 2, std::min(cfg.max_k, n - 1), cfg.select, cfg.seed, cfg.knn_k);
  if (k > n) throw std::invalid_argument("gebi: cluster_k exceeds the number of samples");
  const ClusterAssignment a = spectral_cluster(points, k, std::min(cfg.knn_k, n - 1), cfg.seed);
  ClusterReport r = summarize_clusters(data, a.labels, k, cfg.min_cluster_size);
  r.mode = cfg.mode;
  r.config_echo = gebi_config_json(cfg);
  return r;
}

std::string gebi_config_json(const GebiConfig& cfg) {
  nlohmann::ordered_json j;
  j["mode"] = gebi_mode_name(cfg.mode);
  j["image_dims"] = cfg.image_dims;
  j["attribution_dims"] = cfg.attribution_dims;
  j["knn_k"] = cfg.knn_k;
  j["cluster_k"] = cfg.cluster_k;
  j["max_k"] = cfg.max_k;
  j["select"] = cfg.select == SelectMethod::kEigengap ? "eigengap" : "elbow";
  j["explainer"] = explainer_name(cfg.explainer);
  j["target_class"] = cfg.target_class;
  j["analysis_side"] = cfg.analysis_side;
  j["spray_side"] = cfg.spray_side;
  j["equalize_images"] = cfg.equalize_images;
  j["equalize_maps"] = cfg.equalize_maps;
  j["min_cluster_size"] = cfg.min_cluster_size;
  j["seed"] = cfg.seed;
  return j.dump();
}

std::string cluster_report_json(const ClusterReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = gebi_mode_name(r.mode);
  j["k"] = r.k;
  j["config"] = r.config_echo.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json::parse(r.config_echo);
  nlohmann::ordered_json purity = nlohmann::ordered_json::object();
  for (const auto& [a, p] : r.purity)
    purity[std::string(artifact_name(a))] = {{"best", p.best}, {"best_cluster", p.best_cluster}, {"remaining", p.remaining}};
  j["purity"] = purity;
  j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : r.clusters) {
    nlohmann::ordered_json cj;
    cj["index"] = c.index;
    cj["size"] = c.size();
    nlohmann::ordered_json freq = nlohmann::ordered_json::object();
    for (const auto& [a, f] : c.artifact_frequency) freq[std::string(artifact_name(a))] = f;
    cj["artifact_frequency"] = freq;
    nlohmann::ordered_json classes = nlohmann::ordered_json::object();
    for (const auto& [l, n] : c.class_counts) classes[std::to_string(l)] = n;
    cj["class_counts"] = classes;
    cj["ids"] = c.ids;
    j["clusters"].push_back(cj);
  }
  return j.dump(2);
}

Image contact_sheet(const Dataset& data, const ClusterReport& report, int max_tiles, int tile_side) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : data.samples) by_id[s.id] = &s;
  const int rows = std::max<int>(1, static_cast<int>(report.clusters.size()));
  Image sheet = Image::Ones(rows * (tile_side + 2), max_tiles * (tile_side + 2));
  for (int c = 0; c < static_cast<int>(report.clusters.size()); ++c) {
    const auto& ids = report.clusters[c].ids;
    for (int t = 0; t < max_tiles && t < static_cast<int>(ids.size()); ++t) {
      const auto it = by_id.find(ids[t]);
      if (it == by_id.end()) continue;
      sheet.block(c * (tile_side + 2) + 1, t * (tile_side + 2) + 1, tile_side, tile_side) =
          resize_bilinear(it->second->image, tile_side, tile_side);
    }
  }
  return sheet;
}

}  // namespace biaslab
