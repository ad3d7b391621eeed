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


#include "biaslab/stylemix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "biaslab/errors.hpp"
#include "biaslab/io.hpp"
#include "biaslab/log.hpp"
#include "biaslab/random.hpp"
#include "biaslab/training.hpp"

namespace biaslab {
namespace {

// [1, C, ...] -> C x (positions)
std::pair<int, int> feature_dims(const ad::Shape& s) {
  if (s.size() < 2 || s[0] != 1) throw std::invalid_argument("style: expected a single-image activation");
  int m = 1;
  for (std::size_t i = 2; i < s.size(); ++i) m *= s[i];
  return {s[1], m};
}

ad::Var as_matrix(ad::Var act) {
  const auto [c, m] = feature_dims(act.shape());
  return ad::reshape(act, ad::Shape{c, m});
}

const Eigen::MatrixXd& layer_of(const FeatureMaps& f, const std::string& layer, const char* what) {
  const auto it = f.find(layer);
  if (it == f.end()) throw std::invalid_argument(std::string(what) + ": no features for layer '" + layer + "'");
  return it->second;
}

ad::Tensor to_tensor(const Eigen::MatrixXd& m) {
  ad::Tensor t(ad::Shape{static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  Eigen::Map<Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(t.data.data(), m.rows(), m.cols()) = m;
  return t;
}

}  // namespace

void StyleTransferConfig::validate(const Network& model) const {
  if (!(alpha >= 0 && beta >= 0)) throw std::invalid_argument("style: alpha and beta must be >= 0");
  if (iterations < 0) throw std::invalid_argument("style: iterations must be >= 0");
  if (!(step_size > 0)) throw std::invalid_argument("style: step_size must be positive");
  for (const auto* list : {&content_layers, &style_layers})
    for (const auto& l : *list)
      if (!model.has_layer(l)) throw std::invalid_argument("style: model has no layer '" + l + "'");
}

FeatureMaps extract_features(const Network& model, const Image& image, const std::vector<std::string>& layers) {
  ad::Tape tape;
  const auto params = model.bind(tape);
  Activations acts;
  model.forward(tape, params, tape.constant(to_batch(std::span(&image, 1))), &acts);
  FeatureMaps out;
  for (const auto& l : layers) {
    const auto it = acts.find(l);
    if (it == acts.end()) throw std::invalid_argument("style: model has no layer '" + l + "'");
    const ad::Tensor& t = it->second.value();
    const auto [c, m] = feature_dims(t.shape);
    out[l] = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(t.data.data(), c, m);
  }
  return out;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& f) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(f.rows(), f.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(f);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();  // exact symmetry
  return g;
}

ad::Var gram_matrix(ad::Var f) { return ad::matmul(f, ad::transpose(f)); }

double content_loss(const FeatureMaps& base, const FeatureMaps& content, const std::string& layer) {
  const auto& a = layer_of(base, layer, "content_loss");
  const auto& b = layer_of(content, layer, "content_loss");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("content_loss: feature shapes differ at '" + layer + "'");
  return 0.5 * (b - a).squaredNorm();
}

double style_loss(const FeatureMaps& base, const FeatureMaps& style, const std::vector<std::string>& layers) {
  double total = 0;
  for (const auto& l : layers) {
    const auto& a = layer_of(base, l, "style_loss");
    const auto& b = layer_of(style, l, "style_loss");
    if (a.rows() != b.rows()) throw std::invalid_argument("style_loss: filter counts differ at '" + l + "'");
    total += (gram_matrix(b) - gram_matrix(a)).squaredNorm();
  }
  return total;
}

NstResult nst_optimize(const Image& content, const Image& style, const Network& model, const StyleTransferConfig& cfg) {
  cfg.validate(model);
  if (content.rows() != model.rows() || content.cols() != model.cols() || style.rows() != model.rows() ||
      style.cols() != model.cols())
    throw std::invalid_argument("nst: images must match the model input size");
  const FeatureMaps target_content = extract_features(model, content, cfg.content_layers);
  const FeatureMaps target_style = extract_features(model, style, cfg.style_layers);
  std::map<std::string, ad::Tensor> target_gram;
  for (const auto& l : cfg.style_layers) target_gram[l] = to_tensor(gram_matrix(target_style.at(l)));

  NstResult r;
  r.image = content;
  for (int it = 0;; ++it) {
    ad::Tape tape;
    const auto params = model.bind(tape);
    auto x = tape.variable(to_batch(std::span(&r.image, 1)));
    Activations acts;
    model.forward(tape, params, x, &acts);
    ad::Var lc = tape.constant(ad::Tensor::scalar(0));
    for (const auto& l : cfg.content_layers) {
      auto d = ad::sub(as_matrix(acts.at(l)), tape.constant(to_tensor(target_content.at(l))));
      lc = ad::add(lc, ad::scale(ad::sum(ad::square(d)), 0.5));
    }
    ad::Var ls = tape.constant(ad::Tensor::scalar(0));
    for (const auto& l : cfg.style_layers) {
      auto d = ad::sub(gram_matrix(as_matrix(acts.at(l))), tape.constant(target_gram.at(l)));
      ls = ad::add(ls, ad::sum(ad::square(d)));
    }
    auto total = ad::add(ad::scale(lc, cfg.alpha), ad::scale(ls, cfg.beta));
    const double value = total.value().item();
    if (!std::isfinite(value)) throw NumericError("nst: non-finite loss at iteration " + std::to_string(it));
    r.trace.push_back(value);
    r.content_trace.push_back(lc.value().item());
    r.style_trace.push_back(ls.value().item());
    if (it == cfg.iterations) break;

    const ad::Tensor g = tape.backward(total, {x})[0].value();
    const double peak = g.data.cwiseAbs().maxCoeff();
    if (!std::isfinite(peak)) throw NumericError("nst: non-finite gradient at iteration " + std::to_string(it));
    if (peak == 0) continue;
    const Image step = from_batch(g, 0) * (cfg.step_size / peak);
    r.image = clamp01(r.image - step);
  }
  return r;
}

std::vector<int> pseudo_label(std::span<const double> scores, int quota0, int quota1,
                              std::span<const std::string> ids) {
  const std::size_t n = scores.size();
  if (quota0 < 0 || quota1 < 0) throw std::invalid_argument("pseudo_label: quotas must be non-negative");
  if (static_cast<std::size_t>(quota0) + static_cast<std::size_t>(quota1) != n)
    throw std::invalid_argument("pseudo_label: quotas " + std::to_string(quota0) + "/" + std::to_string(quota1) +
                                " do not match " + std::to_string(n) + " samples");
  if (!ids.empty() && ids.size() != n) throw std::invalid_argument("pseudo_label: ids and scores differ in length");
  for (double s : scores)
    if (!(s >= 0 && s <= 1)) throw std::invalid_argument("pseudo_label: scores must lie in [0, 1]");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return !ids.empty() && ids[a] < ids[b];
  });
  std::vector<int> labels(n, 0);
  for (std::size_t i = quota0; i < n; ++i) labels[order[i]] = 1;
  if (quota0 > 0 && quota1 > 0 && scores[order[quota0 - 1]] == scores[order[quota0]])
    warn("pseudo_label: tied scores at the threshold " + io::format_double(scores[order[quota0]]) +
         " were split by id order");
  return labels;
}

StdaResult stda_generate(const Dataset& data, const Network& model, const StdaConfig& cfg, int pairs) {
  if (pairs < 0) throw std::invalid_argument("stda: pairs must be >= 0");
  cfg.nst.validate(model);
  if (model.num_classes() != 2) throw std::invalid_argument("stda: pseudo-labeling needs a two-class model");
  StdaResult result;
  result.synthetic.num_classes = model.num_classes();
  if (pairs == 0) return result;

  std::vector<const Sample*> contents, styles;
  for (const auto& s : data.samples) {
    if (s.split != Split::kTrain) continue;
    if (s.label == cfg.content_class) contents.push_back(&s);
    if (s.label == cfg.style_class) styles.push_back(&s);
  }
  if (contents.empty() || styles.empty())
    throw DataError("stda: training split lacks content (class " + std::to_string(cfg.content_class) +
                    ") or style (class " + std::to_string(cfg.style_class) + ") images");

  Rng rng(mix_seed(cfg.seed, 0x57da));
  std::uniform_int_distribution<std::size_t> pick_content(0, contents.size() - 1), pick_style(0, styles.size() - 1);
  std::vector<Image> images;
  for (int p = 0; p < pairs; ++p) {
    const Sample* c = contents[pick_content(rng)];
    const Sample* s = styles[pick_style(rng)];
    char id[32];
    std::snprintf(id, sizeof id, "stda_%05d", p);
    Sample out;
    out.id = id;
    out.image = nst_optimize(c->image, s->image, model, cfg.nst).image;
    out.split = Split::kTrain;
    out.annotation = c->annotation;
    images.push_back(out.image);
    result.provenance.push_back({out.id, c->id, s->id, cfg.nst.iterations, 0});
    result.synthetic.samples.push_back(std::move(out));
  }

  const Eigen::MatrixXd prob = probabilities(model, images);
  std::vector<double> scores(pairs);
  std::vector<std::string> ids(pairs);
  for (int p = 0; p < pairs; ++p) {
    scores[p] = std::clamp(prob(p, 1), 0.0, 1.0);
    ids[p] = result.provenance[p].id;
    result.provenance[p].score = scores[p];
  }
  const int quota1 = pairs / 2;
  const auto labels = pseudo_label(scores, pairs - quota1, quota1, ids);
  for (int p = 0; p < pairs; ++p) result.synthetic.samples[p].label = labels[p];
  return result;
}

std::string stda_provenance_csv(const StdaResult& result) {
  std::ostringstream os;
  os << "id,content_id,style_id,iterations,score,label\n";
  for (std::size_t i = 0; i < result.provenance.size(); ++i) {
    const auto& p = result.provenance[i];
    os << p.id << ',' << p.content_id << ',' << p.style_id << ',' << p.iterations << ','
       << io::format_double(p.score) << ',' << result.synthetic.samples[i].label << '\n';
  }
  return os.str();
}

}  // namespace biaslab
