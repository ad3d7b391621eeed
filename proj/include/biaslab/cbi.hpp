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

// Counterfactual bias insertion: put an artifact into every sample and
// measure how the prediction moves.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biaslab/dataset.hpp"
#include "biaslab/network.hpp"
#include "biaslab/transforms.hpp"

namespace biaslab {

struct CbiSample {
  std::string id;
  int label = 0;
  int predicted = 0;         // argmax on the original
  int predicted_biased = 0;  // argmax on the transformed copy
  double p_orig = 0;         // probability of `predicted`
  double p_biased = 0;       // same class, transformed input
  double change = 0;         // p_orig - p_biased
  bool switched() const { return predicted != predicted_biased; }
};

struct CbiReport {
  std::string transform;
  std::vector<CbiSample> samples;
  double mean_change = 0;
  double median_change = 0;
  double max_change = 0;  // largest |change|
  long switched_total = 0;
  std::map<std::pair<int, int>, long> switched_by_direction;  // (from, to)
  std::map<int, double> mean_change_by_label;

  std::size_t size() const { return samples.size(); }
  double switched_fraction() const;
};

// Per-sample transform seeds are mix_seed(seed, hash_id(id)), so reports do
// not depend on dataset order.
CbiReport run_cbi(const Network& model, const Dataset& data, const BiasTransform& transform, std::uint64_t seed = 0);

// Aggregates from raw per-sample values; run_cbi uses this too.
CbiReport summarize_cbi(std::string transform, std::vector<CbiSample> samples);

std::string cbi_to_json(const CbiReport& report);
// id,p_orig,p_biased,change,switched,direction
std::string cbi_to_csv(const CbiReport& report);

}  // namespace biaslab
