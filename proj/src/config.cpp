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


#include "biaslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "biaslab/errors.hpp"
#include "biaslab/io.hpp"

namespace biaslab {
namespace toml {
namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

std::string dotted_key(std::string_view raw, int line) {
  std::string out;
  std::size_t start = 0;
  while (true) {
    const auto dot = raw.find('.', start);
    const auto part = trim(raw.substr(start, dot == std::string_view::npos ? raw.npos : dot - start));
    if (!bare_key(part)) fail(line, "invalid key '" + std::string(raw) + "'");
    if (!out.empty()) out += '.';
    out += part;
    if (dot == std::string_view::npos) return out;
    start = dot + 1;
  }
}

// Cuts a comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string && s[i] == '\\') {
      ++i;
    } else if (s[i] == '"') {
      in_string = !in_string;
    } else if (s[i] == '#' && !in_string) {
      return s.substr(0, i);
    }
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  Value parse_all() {
    Value v = value(true);
    skip_space();
    if (pos_ != s_.size()) fail(line_, "unexpected text after value: '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r' || s_[pos_] == '\n')) ++pos_;
  }

  Value value(bool allow_array) {
    skip_space();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    Value v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.kind = Value::Kind::kString;
      v.s = string();
    } else if (c == '[') {
      if (!allow_array) fail(line_, "nested arrays are not supported");
      v.kind = Value::Kind::kArray;
      ++pos_;
      while (true) {
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        v.items.push_back(value(false));
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
        } else if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        } else {
          fail(line_, "expected ',' or ']' in array");
        }
      }
      for (const auto& item : v.items)
        if (item.kind != v.items.front().kind &&
            !(item.kind != Value::Kind::kString && item.kind != Value::Kind::kBool &&
              v.items.front().kind != Value::Kind::kString && v.items.front().kind != Value::Kind::kBool))
          fail(line_, "array mixes value types");
    } else {
      auto end = s_.find_first_of(",] \t\r\n", pos_);
      if (end == std::string_view::npos) end = s_.size();
      const std::string_view tok = s_.substr(pos_, end - pos_);
      pos_ = end;
      scalar(tok, v);
    }
    return v;
  }

  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape '\\") + e + "'");
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  void scalar(std::string_view tok, Value& v) {
    if (tok == "true" || tok == "false") {
      v.kind = Value::Kind::kBool;
      v.b = tok == "true";
      return;
    }
    std::string clean;
    for (char c : tok)
      if (c != '_') clean += c;
    const char* b = clean.data();
    const char* e = b + clean.size();
    if (!clean.empty() && clean[0] == '+') ++b;
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      auto [p, ec] = std::from_chars(b, e, v.i);
      if (ec == std::errc() && p == e && b != e) {
        v.kind = Value::Kind::kInt;
        return;
      }
    } else {
      auto [p, ec] = std::from_chars(b, e, v.f);
      if (ec == std::errc() && p == e && std::isfinite(v.f)) {
        v.kind = Value::Kind::kFloat;
        return;
      }
    }
    fail(line_, "cannot parse value '" + std::string(tok) + "'");
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

int bracket_depth(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string && s[i] == '\\') {
      ++i;
    } else if (s[i] == '"') {
      in_string = !in_string;
    } else if (!in_string) {
      depth += s[i] == '[';
      depth -= s[i] == ']';
    }
  }
  return depth;
}

const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::kBool: return "boolean";
    case Value::Kind::kInt: return "integer";
    case Value::Kind::kFloat: return "float";
    case Value::Kind::kString: return "string";
    case Value::Kind::kArray: return "array";
  }
  return "?";
}

[[noreturn]] void type_error(const std::string& key, const Value& v, const char* want) {
  fail(v.line, "'" + key + "' must be " + want + ", got " + kind_name(v.kind));
}

double as_number(const std::string& key, const Value& v) {
  if (v.kind == Value::Kind::kFloat) return v.f;
  if (v.kind == Value::Kind::kInt) return static_cast<double>(v.i);
  type_error(key, v, "a number");
}

std::int64_t as_int(const std::string& key, const Value& v) {
  if (v.kind != Value::Kind::kInt) type_error(key, v, "an integer");
  return v.i;
}

}  // namespace

Table parse(std::string_view text) {
  Table table;
  std::string prefix;
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    const auto nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const int line = static_cast<int>(n) + 1;
    std::string_view s = trim(strip_comment(lines[n]));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.size() < 3 || s.back() != ']' || s[1] == '[') fail(line, "malformed table header '" + std::string(s) + "'");
      prefix = dotted_key(s.substr(1, s.size() - 2), line) + ".";
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(line, "expected 'key = value'");
    const std::string key = prefix + dotted_key(s.substr(0, eq), line);
    std::string value(trim(s.substr(eq + 1)));
    // Arrays may continue over several lines.
    while (bracket_depth(value) > 0 && n + 1 < lines.size()) value += "\n" + std::string(trim(strip_comment(lines[++n])));
    if (bracket_depth(value) != 0) fail(line, "unbalanced brackets");
    if (table.count(key)) fail(line, "duplicate key '" + key + "'");
    table[key] = ValueParser(value, line).parse_all();
  }
  return table;
}

const Value* Reader::take(const std::string& key) {
  const auto it = table_.find(key);
  if (it == table_.end()) return nullptr;
  auto node = table_.extract(it);
  taken_.push_back(std::move(node.mapped()));
  return &taken_.back();
}

void Reader::get(const std::string& key, bool& out) {
  if (const Value* v = take(key)) {
    if (v->kind != Value::Kind::kBool) type_error(key, *v, "a boolean");
    out = v->b;
  }
}

void Reader::get(const std::string& key, int& out) {
  if (const Value* v = take(key)) {
    const auto i = as_int(key, *v);
    if (i < INT32_MIN || i > INT32_MAX) fail(v->line, "'" + key + "' is out of range");
    out = static_cast<int>(i);
  }
}

void Reader::get(const std::string& key, std::uint64_t& out) {
  if (const Value* v = take(key)) {
    const auto i = as_int(key, *v);
    if (i < 0) fail(v->line, "'" + key + "' must be non-negative");
    out = static_cast<std::uint64_t>(i);
  }
}

void Reader::get(const std::string& key, double& out) {
  if (const Value* v = take(key)) out = as_number(key, *v);
}

void Reader::get(const std::string& key, std::string& out) {
  if (const Value* v = take(key)) {
    if (v->kind != Value::Kind::kString) type_error(key, *v, "a string");
    out = v->s;
  }
}

void Reader::get(const std::string& key, std::vector<double>& out) {
  if (const Value* v = take(key)) {
    if (v->kind != Value::Kind::kArray) type_error(key, *v, "an array");
    out.clear();
    for (const auto& item : v->items) out.push_back(as_number(key, item));
  }
}

void Reader::get(const std::string& key, std::vector<std::uint64_t>& out) {
  if (const Value* v = take(key)) {
    if (v->kind != Value::Kind::kArray) type_error(key, *v, "an array");
    out.clear();
    for (const auto& item : v->items) {
      const auto i = as_int(key, item);
      if (i < 0) fail(v->line, "'" + key + "' entries must be non-negative");
      out.push_back(static_cast<std::uint64_t>(i));
    }
  }
}

void Reader::get(const std::string& key, std::vector<std::string>& out) {
  if (const Value* v = take(key)) {
    if (v->kind != Value::Kind::kArray) type_error(key, *v, "an array");
    out.clear();
    for (const auto& item : v->items) {
      if (item.kind != Value::Kind::kString) type_error(key, item, "an array of strings");
      out.push_back(item.s);
    }
  }
}

void Reader::finish() const {
  if (!table_.empty()) {
    const auto& [key, v] = *table_.begin();
    fail(v.line, "unknown key '" + key + "'");
  }
}

}  // namespace toml

namespace {

std::string frame_shape_name(FrameShape s) {
  switch (s) {
    case FrameShape::kRound: return "round";
    case FrameShape::kRect: return "rect";
    case FrameShape::kMixed: return "mixed";
  }
  return "round";
}

FrameShape parse_frame_shape(const std::string& s) {
  if (s == "round") return FrameShape::kRound;
  if (s == "rect") return FrameShape::kRect;
  if (s == "mixed") return FrameShape::kMixed;
  throw std::invalid_argument("unknown frame shape '" + s + "' (round, rect, mixed)");
}

std::string select_name(SelectMethod m) { return m == SelectMethod::kEigengap ? "eigengap" : "elbow"; }

SelectMethod parse_select(const std::string& s) {
  if (s == "elbow") return SelectMethod::kElbow;
  if (s == "eigengap") return SelectMethod::kEigengap;
  throw std::invalid_argument("unknown selection method '" + s + "' (elbow, eigengap)");
}

// Emits TOML grouped by table, in first-seen order.
class Writer {
 public:
  void put(const std::string& key, const std::string& rendered) {
    const auto dot = key.rfind('.');
    const std::string table = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    auto it = std::find_if(tables_.begin(), tables_.end(), [&](const auto& t) { return t.first == table; });
    if (it == tables_.end()) it = tables_.insert(tables_.end(), {table, {}});
    it->second.push_back(leaf + " = " + rendered);
  }
  std::string str() const {
    std::string out;
    for (const auto& [table, lines] : tables_) {
      if (!table.empty()) out += (out.empty() ? "[" : "\n[") + table + "]\n";
      for (const auto& l : lines) out += l + "\n";
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> tables_;
};

std::string render(bool v) { return v ? "true" : "false"; }
std::string render(int v) { return std::to_string(v); }
std::string render(std::uint64_t v) { return std::to_string(v); }
std::string render(double v) {
  std::string s = io::format_double(v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}
std::string render(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}
template <class T>
std::string render(const std::vector<T>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + render(v[i]);
  return out + "]";
}

// One place lists every key, so parsing and echoing cannot drift apart.
template <class F>
void visit(RunConfig& c, F&& f) {
  f("seed", c.seed);
  f("threads", c.threads);
  f("inputs.data", c.data);
  f("inputs.model", c.model);

  auto& g = c.generator;
  f("data.n_per_class", g.n_per_class);
  f("data.side", g.side);
  f("data.train_fraction", g.train_fraction);
  f("data.val_fraction", g.val_fraction);
  for (auto [name, style] : {std::pair{"class0", &g.class0}, std::pair{"class1", &g.class1}}) {
    const std::string p = std::string("data.") + name + ".";
    f(p + "radius_min", style->radius_min);
    f(p + "radius_max", style->radius_max);
    f(p + "irregularity_min", style->irregularity_min);
    f(p + "irregularity_max", style->irregularity_max);
    f(p + "texture_min", style->texture_min);
    f(p + "texture_max", style->texture_max);
  }
  for (Artifact a : kAllArtifacts) {
    const auto it = g.plan.find(a);
    std::vector<double> rates = it == g.plan.end() ? std::vector<double>{0.0, 0.0}
                                                   : std::vector<double>{it->second.p_class0, it->second.p_class1};
    const std::string key = "data.plan." + std::string(artifact_name(a));
    f(key, rates);
    if (rates.size() != 2) throw ConfigError("config: '" + key + "' needs two probabilities [class0, class1]");
    if (rates[0] == 0 && rates[1] == 0)
      g.plan.erase(a);
    else
      g.plan[a] = {rates[0], rates[1]};
  }
  std::string shape = frame_shape_name(g.frame.shape);
  f("data.frame.shape", shape);
  g.frame.shape = parse_frame_shape(shape);
  f("data.frame.min_width", g.frame.min_width);
  f("data.frame.max_width", g.frame.max_width);
  f("data.circle.min_radius", g.circle.min_radius);
  f("data.circle.max_radius", g.circle.max_radius);
  f("data.circle.intensity", g.circle.intensity);

  f("train.epochs", c.train.epochs);
  f("train.learning_rate", c.train.learning_rate);
  f("train.batch_size", c.train.batch_size);
  f("train.lr_decay", c.train.lr_decay);

  auto& e = c.gebi;
  std::string mode(gebi_mode_name(e.mode));
  f("gebi.mode", mode);
  e.mode = parse_gebi_mode(mode);
  f("gebi.image_dims", e.image_dims);
  f("gebi.attribution_dims", e.attribution_dims);
  f("gebi.knn_k", e.knn_k);
  f("gebi.cluster_k", e.cluster_k);
  f("gebi.max_k", e.max_k);
  std::string select = select_name(e.select);
  f("gebi.select", select);
  e.select = parse_select(select);
  std::string explainer(explainer_name(e.explainer));
  f("gebi.explainer", explainer);
  e.explainer = parse_explainer(explainer);
  f("gebi.target_class", e.target_class);
  f("gebi.analysis_side", e.analysis_side);
  f("gebi.spray_side", e.spray_side);
  f("gebi.equalize_images", e.equalize_images);
  f("gebi.equalize_maps", e.equalize_maps);
  f("gebi.occlusion_patch", e.occlusion_patch);
  f("gebi.occlusion_stride", e.occlusion_stride);
  f("gebi.min_cluster_size", e.min_cluster_size);

  f("cbi.transforms", c.cbi_transforms);

  f("tda.transform", c.tda_transform);
  f("tda.probabilities", c.tda_probabilities);
  f("tda.seeds", c.tda_seeds);

  auto& fb = c.feedback;
  f("feedback.alpha", fb.alpha);
  f("feedback.epochs", fb.train.epochs);
  f("feedback.learning_rate", fb.train.learning_rate);
  f("feedback.batch_size", fb.train.batch_size);
  f("feedback.lr_decay", fb.train.lr_decay);
  f("feedback.transform", fb.transform);
  f("feedback.cls_input", fb.cls_input);
  f("feedback.normalize_maps", fb.normalize_maps);

  auto& st = c.stda;
  f("stda.pairs", st.pairs);
  f("stda.content_class", st.content_class);
  f("stda.style_class", st.style_class);
  f("stda.alpha", st.nst.alpha);
  f("stda.beta", st.nst.beta);
  f("stda.content_layers", st.nst.content_layers);
  f("stda.style_layers", st.nst.style_layers);
  f("stda.iterations", st.nst.iterations);
  f("stda.step_size", st.nst.step_size);
}

}  // namespace

void RunConfig::resolve() {
  try {
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    generator.seed = seed;
    train.seed = seed;
    gebi.seed = seed;
    feedback.train.seed = seed;
    if (tda_seeds.empty()) tda_seeds = {seed};
    generator.validate();
    train.validate();
    gebi.validate();
    feedback.train.validate();
    if (!(feedback.alpha >= 0 && feedback.alpha <= 1)) throw std::invalid_argument("feedback.alpha must lie in [0, 1]");
    if (feedback.cls_input != "biased" && feedback.cls_input != "original")
      throw std::invalid_argument("feedback.cls_input must be 'biased' or 'original'");
    for (const auto& t : cbi_transforms) parse_transform(t);
    parse_transform(tda_transform);
    parse_transform(feedback.transform);
    for (double p : tda_probabilities)
      if (!(p >= 0 && p <= 1)) throw std::invalid_argument("tda.probabilities must lie in [0, 1]");
    if (tda_probabilities.empty()) throw std::invalid_argument("tda.probabilities is empty");
    if (stda.pairs < 0) throw std::invalid_argument("stda.pairs must be >= 0");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig parse_run_config(std::string_view text, bool resolve) {
  toml::Reader reader(toml::parse(text));
  RunConfig c;
  try {
    visit(c, [&](const std::string& key, auto& field) { reader.get(key, field); });
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  reader.finish();
  if (resolve) c.resolve();
  return c;
}

std::string to_toml(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Writer w;
  visit(copy, [&](const std::string& key, auto& field) { w.put(key, render(field)); });
  return w.str();
}

}  // namespace biaslab
