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

// Run configuration: a small TOML subset (tables, dotted keys, strings,
// integers, floats, booleans, flat arrays) bound onto the module configs.

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/gebi.hpp"
#include "biaslab/mitigation.hpp"
#include "biaslab/stylemix.hpp"
#include "biaslab/synthdata.hpp"
#include "biaslab/training.hpp"

namespace biaslab {
namespace toml {

struct Value {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool b = false;
  std::int64_t i = 0;
  double f = 0;
  std::string s;
  std::vector<Value> items;
  int line = 0;
};

// Keys are fully dotted ("data.side"). Throws ConfigError naming the line.
using Table = std::map<std::string, Value>;
Table parse(std::string_view text);

// Pulls typed values out of a table; finish() rejects whatever is left.
class Reader {
 public:
  explicit Reader(Table table) : table_(std::move(table)) {}

  void get(const std::string& key, bool& out);
  void get(const std::string& key, int& out);
  void get(const std::string& key, std::uint64_t& out);
  void get(const std::string& key, double& out);
  void get(const std::string& key, std::string& out);
  void get(const std::string& key, std::vector<double>& out);
  void get(const std::string& key, std::vector<std::uint64_t>& out);
  void get(const std::string& key, std::vector<std::string>& out);
  bool has(const std::string& key) const { return table_.count(key) > 0; }
  void finish() const;

 private:
  const Value* take(const std::string& key);
  Table table_;
  std::deque<Value> taken_;
};

}  // namespace toml

struct FeedbackSection {
  double alpha = 0.5;
  TrainConfig train{2, 0.02, 32, 0, 0.9};
  std::string transform = "frame";
  std::string cls_input = "biased";
  bool normalize_maps = true;
};

struct StdaSection {
  int pairs = 20;
  int content_class = 0;
  int style_class = 1;
  StyleTransferConfig nst;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string data;   // dataset directory; empty: generate from [data]
  std::string model;  // checkpoint; empty: train from [train]
  GeneratorSpec generator;
  TrainConfig train;
  GebiConfig gebi;
  std::vector<std::string> cbi_transforms{"frame", "circle"};
  std::string tda_transform = "frame";
  std::vector<double> tda_probabilities{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> tda_seeds;  // empty: {seed}
  FeedbackSection feedback;
  StdaSection stda;

  // Propagates `seed` into every module config and checks values.
  void resolve();
};

// With `resolve` false the caller applies overrides and calls resolve().
RunConfig parse_run_config(std::string_view text, bool resolve = true);
// Every key with its resolved value; parse_run_config(to_toml(c)) == c.
std::string to_toml(const RunConfig& cfg);

}  // namespace biaslab
