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

#include "biaslab/cbi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "biaslab/io.hpp"
#include "biaslab/random.hpp"
#include "json.hpp"

namespace biaslab {
namespace {

std::string direction(int from, int to) { return std::to_string(from) + "->" + std::to_string(to); }

}  // namespace

double CbiReport::switched_fraction() const {
  return samples.empty() ? 0.0 : static_cast<double>(switched_total) / static_cast<double>(samples.size());
}

CbiReport summarize_cbi(std::string transform, std::vector<CbiSample> samples) {
  CbiReport r;
  r.transform = std::move(transform);
  r.samples = std::move(samples);
  const std::size_t n = r.samples.size();
  if (n == 0) return r;
  std::vector<double> changes;
  std::map<int, std::pair<double, long>> by_label;
  double sum = 0;
  for (const auto& s : r.samples) {
    changes.push_back(s.change);
    sum += s.change;
    r.max_change = std::max(r.max_change, std::abs(s.change));
    auto& [total, count] = by_label[s.label];
    total += s.change;
    ++count;
    if (s.switched()) {
      ++r.switched_total;
      ++r.switched_by_direction[{s.predicted, s.predicted_biased}];
    }
  }
  r.mean_change = sum / static_cast<double>(n);
  std::sort(changes.begin(), changes.end());
  r.median_change = n % 2 ? changes[n / 2] : (changes[n / 2 - 1] + changes[n / 2]) / 2;
  for (const auto& [label, tc] : by_label) r.mean_change_by_label[label] = tc.first / static_cast<double>(tc.second);
  return r;
}

CbiReport run_cbi(const Network& model, const Dataset& data, const BiasTransform& transform, std::uint64_t seed) {
  if (model.num_classes() != data.num_classes)
    throw std::invalid_argument("run_cbi: model and dataset class counts differ");
  std::vector<Image> originals, biased;
  originals.reserve(data.size());
  biased.reserve(data.size());
  for (const auto& s : data.samples) {
    originals.push_back(s.image);
    biased.push_back(transform.apply(s.image, mix_seed(seed, hash_id(s.id)), &s.annotation));
  }
  std::vector<CbiSample> out;
  if (!data.empty()) {
    const Eigen::MatrixXd p0 = probabilities(model, originals);
    const Eigen::MatrixXd p1 = probabilities(model, biased);
    const auto a0 = argmax_rows(p0);
    const auto a1 = argmax_rows(p1);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CbiSample c;
      c.id = data.samples[i].id;
      c.label = data.samples[i].label;
      c.predicted = a0[i];
      c.predicted_biased = a1[i];
      c.p_orig = p0(i, a0[i]);
      c.p_biased = p1(i, a0[i]);
      c.change = c.p_orig - c.p_biased;
      out.push_back(c);
    }
  }
  return summarize_cbi(std::string(transform_name(transform.kind)), std::move(out));
}

std::string cbi_to_json(const CbiReport& r) {
  nlohmann::ordered_json j;
  j["transform"] = r.transform;
  j["samples"] = r.samples.size();
  j["mean_change"] = r.mean_change;
  j["median_change"] = r.median_change;
  j["max_change"] = r.max_change;
  j["switched_total"] = r.switched_total;
  j["switched_fraction"] = r.switched_fraction();
  nlohmann::ordered_json dir = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.switched_by_direction) dir[direction(k.first, k.second)] = v;
  j["switched_by_direction"] = dir;
  nlohmann::ordered_json by_label = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.mean_change_by_label) by_label[std::to_string(k)] = v;
  j["mean_change_by_label"] = by_label;
  return j.dump(2);
}

std::string cbi_to_csv(const CbiReport& r) {
  std::ostringstream os;
  os << "id,p_orig,p_biased,change,switched,direction\n";
  for (const auto& s : r.samples)
    os << s.id << ',' << io::format_double(s.p_orig) << ',' << io::format_double(s.p_biased) << ','
       << io::format_double(s.change) << ',' << (s.switched() ? 1 : 0) << ','
       << (s.switched() ? direction(s.predicted, s.predicted_biased) : "") << '\n';
  return os.str();
}

}  // namespace biaslab
