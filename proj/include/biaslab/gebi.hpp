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

// Global explanations for bias identification: embed images and their
// attribution maps, cluster the concatenation, and report which annotated
// artifacts dominate each cluster. SpRAy and IsoSpRAy (maps only) are kept
// as ablations.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/attribution.hpp"
#include "biaslab/clustering.hpp"
#include "biaslab/dataset.hpp"
#include "biaslab/network.hpp"

namespace biaslab {

enum class GebiMode { kSpray, kIsoSpray, kGebi };
enum class ExplainerKind { kSaliency, kOcclusion, kLrp };

std::string_view gebi_mode_name(GebiMode m);
GebiMode parse_gebi_mode(std::string_view s);
std::string_view explainer_name(ExplainerKind e);
ExplainerKind parse_explainer(std::string_view s);

struct GebiConfig {
  GebiMode mode = GebiMode::kGebi;
  int image_dims = 10;
  int attribution_dims = 20;
  int knn_k = 10;
  int cluster_k = 0;  // 0: choose with select_k over [2, max_k]
  int max_k = 8;
  SelectMethod select = SelectMethod::kElbow;
  ExplainerKind explainer = ExplainerKind::kSaliency;
  int target_class = 1;
  int analysis_side = 45;
  int spray_side = 10;
  bool equalize_images = true;
  bool equalize_maps = true;
  int occlusion_patch = 6;
  int occlusion_stride = 3;
  int min_cluster_size = 3;  // smaller clusters are ignored for purity
  std::uint64_t seed = 0;

  void validate() const;
};

// Value -> fraction of pixels in its 256-bin histogram bin or below.
// Single-bin images are returned unchanged.
Image equalize_histogram(const Image& img);
// Linear map of [min, max] onto [0, 1]; constant images are unchanged.
Image stretch_contrast(const Image& img);
// Resize to side x side, equalize (optional), stretch.
Image preprocess(const Image& img, int side, bool equalize = true);

// Attribution maps (magnitudes) for `target` with the configured explainer.
std::vector<Image> attribution_maps(const Network& model, const std::vector<Image>& images, int target,
                                    const GebiConfig& cfg);

// Centre columns and scale the block to unit root-mean-square.
Eigen::MatrixXd normalize_block(const Eigen::MatrixXd& block);

// One row per sample.
Eigen::MatrixXd build_embeddings(const Dataset& data, const Network& model, const GebiConfig& cfg);

struct ClusterSummary {
  int index = 0;
  std::vector<std::string> ids;
  std::map<Artifact, double> artifact_frequency;
  std::map<int, long> class_counts;
  std::size_t size() const { return ids.size(); }
};

struct ArtifactPurity {
  double best = 0;       // highest frequency among clusters of sufficient size
  int best_cluster = -1;
  double remaining = 0;  // size-weighted frequency over every other cluster
};

struct ClusterReport {
  GebiMode mode = GebiMode::kGebi;
  int k = 0;
  std::vector<ClusterSummary> clusters;
  std::map<Artifact, ArtifactPurity> purity;
  std::string config_echo;  // JSON of the GebiConfig used
};

ClusterReport summarize_clusters(const Dataset& data, const std::vector<int>& labels, int k,
                                 int min_cluster_size);
ClusterReport run_gebi(const Dataset& data, const Network& model, const GebiConfig& cfg);

std::string gebi_config_json(const GebiConfig& cfg);
std::string cluster_report_json(const ClusterReport& report);
// Grid of up to `max_tiles` member images per cluster, one row per cluster.
Image contact_sheet(const Dataset& data, const ClusterReport& report, int max_tiles = 12, int tile_side = 32);

}  // namespace biaslab
