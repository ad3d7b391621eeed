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

#include "biaslab/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "biaslab/log.hpp"
#include "biaslab/random.hpp"
#include "biaslab/training.hpp"

namespace biaslab {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_image(const Network& net, const Image& image, const char* who) {
  if (image.rows() != net.rows() || image.cols() != net.cols())
    throw std::invalid_argument(std::string(who) + ": image is " + std::to_string(image.rows()) + "x" +
                                std::to_string(image.cols()) + ", model expects " + std::to_string(net.rows()) + "x" +
                                std::to_string(net.cols()));
}

void check_target(const Network& net, int target, const char* who) {
  if (target < 0 || target >= net.num_classes())
    throw std::invalid_argument(std::string(who) + ": target class " + std::to_string(target) + " out of range");
}

AttributionMap make_map(Image signed_values, std::string id, int target) {
  AttributionMap m;
  m.values = signed_values.cwiseAbs();
  m.signed_values = std::move(signed_values);
  m.source_id = std::move(id);
  m.target_class = target;
  return m;
}

ad::Tensor rho(const ad::Tensor& w, double gamma) {
  ad::Tensor r = w;
  if (gamma != 0) r.data += gamma * w.data.cwiseMax(0.0);
  return r;
}

// s = R / (z + eps * sign(z)), with sign(0) taken as +1.
Eigen::VectorXd stabilized_ratio(const Eigen::VectorXd& relevance, const Eigen::VectorXd& z, double eps) {
  Eigen::VectorXd s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) s[i] = relevance[i] / (z[i] + (z[i] >= 0 ? eps : -eps));
  return s;
}

double l2_distance(const Image& a, const Image& b) { return (a - b).norm(); }

}  // namespace

ad::Var signed_saliency(ad::Tape& tape, const Network& net, const BoundParams& params, ad::Var x,
                        std::span<const int> targets) {
  auto z = net.forward(tape, params, x);
  if (static_cast<int>(targets.size()) != z.shape()[0])
    throw std::invalid_argument("saliency: " + std::to_string(targets.size()) + " targets for a batch of " +
                                std::to_string(z.shape()[0]));
  for (int t : targets) check_target(net, t, "saliency");
  // Rows are independent, so d(sum of selected logits)/dx holds each row's
  // own gradient.
  auto selected = ad::sum(ad::mul(z, tape.constant(one_hot(targets, net.num_classes()))));
  return tape.backward(selected, {x})[0];
}

std::vector<Image> saliency_batch(const Network& net, std::span<const Image> images, std::span<const int> targets,
                                  int batch_size) {
  if (images.size() != targets.size()) throw std::invalid_argument("saliency: image/target count differs");
  std::vector<Image> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, images.size() - start);
    for (std::size_t i = 0; i < n; ++i) check_image(net, images[start + i], "saliency");
    ad::Tape tape;
    auto params = net.bind(tape);
    auto x = tape.variable(to_batch(images.subspan(start, n)));
    const auto g = signed_saliency(tape, net, params, x, targets.subspan(start, n)).value();
    for (std::size_t i = 0; i < n; ++i) out.push_back(from_batch(g, static_cast<int>(i)));
  }
  return out;
}

AttributionMap saliency(const Network& net, const Image& image, int target, std::string id) {
  const int t[] = {target};
  return make_map(saliency_batch(net, std::span(&image, 1), t).front(), std::move(id), target);
}

AttributionMap occlusion(const Network& net, const Image& image, int target, int patch_side, int stride,
                         int* evaluations) {
  check_image(net, image, "occlusion");
  check_target(net, target, "occlusion");
  const int rows = static_cast<int>(image.rows()), cols = static_cast<int>(image.cols());
  if (patch_side < 1 || patch_side > std::min(rows, cols))
    throw std::invalid_argument("occlusion: patch side must lie in [1, image side]");
  if (stride < 1 || stride > patch_side)
    throw std::invalid_argument("occlusion: stride must lie in [1, patch side] to cover every pixel");
  auto positions = [&](int extent) {
    std::vector<int> p;
    for (int v = 0; v + patch_side <= extent; v += stride) p.push_back(v);
    if (p.back() + patch_side < extent) p.push_back(extent - patch_side);
    return p;
  };
  const auto ys = positions(rows), xs = positions(cols);
  std::vector<Image> occluded;
  for (int y : ys)
    for (int x : xs) {
      Image o = image;
      o.block(y, x, patch_side, patch_side).setZero();
      occluded.push_back(std::move(o));
    }
  if (evaluations) *evaluations = static_cast<int>(occluded.size());
  const double base = logits(net, std::span(&image, 1))(0, target);
  const Eigen::MatrixXd z = logits(net, occluded);
  Image sum = Image::Zero(rows, cols), count = Image::Zero(rows, cols);
  int k = 0;
  for (int y : ys)
    for (int x : xs) {
      sum.block(y, x, patch_side, patch_side).array() += base - z(k++, target);
      count.block(y, x, patch_side, patch_side).array() += 1;
    }
  return make_map(sum.cwiseQuotient(count), {}, target);
}

void LrpConfig::validate() const {
  if (!(epsilon > 0)) throw std::invalid_argument("lrp: epsilon must be positive");
  if (!(gamma >= 0)) throw std::invalid_argument("lrp: gamma must be non-negative");
}

AttributionMap lrp_epsilon(const Network& net, const Image& image, int target, const LrpConfig& cfg) {
  cfg.validate();
  check_image(net, image, "lrp");
  check_target(net, target, "lrp");
  const auto& layers = net.layers();
  // Forward pass keeping every layer input.
  std::vector<ad::Tensor> inputs;
  std::vector<std::vector<int>> winners(layers.size());
  ad::Tensor a = to_batch(std::span(&image, 1));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    inputs.push_back(a);
    switch (layer.kind) {
      case LayerKind::kNormalize:
        a.data = (a.data.array() - layer.shift) * layer.gain;
        break;
      case LayerKind::kConv2d:
        a = ad::kernels::conv2d(a, net.params().at(layer.name + ".weight"));
        if (layer.bias) {
          const auto& b = net.params().at(layer.name + ".bias").data;
          const int plane = a.shape[2] * a.shape[3];
          for (int c = 0; c < a.shape[1]; ++c) a.data.segment(c * plane, plane).array() += b[c];
        }
        break;
      case LayerKind::kRelu:
        a.data = a.data.cwiseMax(0.0);
        break;
      case LayerKind::kMaxPool2x2:
        a = ad::kernels::maxpool2x2(a, &winners[l]);
        break;
      case LayerKind::kFlatten:
        a = ad::Tensor({1, static_cast<int>(a.data.size())}, a.data);
        break;
      case LayerKind::kDense: {
        const auto& w = net.params().at(layer.name + ".weight");
        Eigen::Map<const RowMat> W(w.data.data(), w.shape[0], w.shape[1]);
        Eigen::VectorXd z = W.transpose() * a.data;
        if (layer.bias) z += net.params().at(layer.name + ".bias").data;
        a = ad::Tensor({1, w.shape[1]}, z);
        break;
      }
    }
  }
  // Relevance starts as the target logit.
  ad::Tensor relevance(a.shape);
  relevance.data[target] = a.data[target];
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const ad::Tensor& in = inputs[l];
    switch (layer.kind) {
      case LayerKind::kNormalize:
      case LayerKind::kRelu:
        break;
      case LayerKind::kFlatten:
        relevance = ad::Tensor(in.shape, relevance.data);
        break;
      case LayerKind::kMaxPool2x2: {
        ad::Tensor routed(in.shape);
        for (std::size_t i = 0; i < winners[l].size(); ++i) routed.data[winners[l][i]] += relevance.data[i];
        relevance = std::move(routed);
        break;
      }
      case LayerKind::kConv2d: {
        const ad::Tensor w = rho(net.params().at(layer.name + ".weight"), cfg.gamma);
        const ad::Tensor z = ad::kernels::conv2d(in, w);
        const ad::Tensor s(z.shape, stabilized_ratio(relevance.data, z.data, cfg.epsilon));
        const ad::Tensor c = ad::kernels::conv2d_input_grad(s, w, in.shape);
        relevance = ad::Tensor(in.shape, in.data.cwiseProduct(c.data));
        break;
      }
      case LayerKind::kDense: {
        const ad::Tensor w = rho(net.params().at(layer.name + ".weight"), cfg.gamma);
        Eigen::Map<const RowMat> W(w.data.data(), w.shape[0], w.shape[1]);
        const Eigen::VectorXd z = W.transpose() * in.data;
        const Eigen::VectorXd s = stabilized_ratio(relevance.data, z, cfg.epsilon);
        relevance = ad::Tensor(in.shape, in.data.cwiseProduct(W * s));
        break;
      }
    }
  }
  return make_map(from_batch(relevance, 0), {}, target);
}

Explainer signed_saliency_explainer(const Network& net, int target) {
  return [&net, target](const Image& x) { return saliency(net, x, target).signed_values; };
}

Explainer saliency_explainer(const Network& net, int target) {
  return [&net, target](const Image& x) { return saliency(net, x, target).values; };
}

ScoreFn logit_score(const Network& net, int target) {
  check_target(net, target, "score");
  return [&net, target](const Image& x) { return logits(net, std::span(&x, 1))(0, target); };
}

AttributionFn saliency_attribution() {
  return [](const Network& net, const Image& x, int target) { return saliency(net, x, target).values; };
}

double max_sensitivity(const Explainer& phi, const Image& image, double radius, int samples, std::uint64_t seed) {
  if (!(radius > 0)) throw std::invalid_argument("max_sensitivity: radius must be positive");
  if (samples < 1) throw std::invalid_argument("max_sensitivity: samples must be >= 1");
  const Image base = phi(image);
  Rng rng(mix_seed(seed, 0x5e75));
  double best = 0;
  for (int s = 0; s < samples; ++s) {
    Image y = image;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      y.data()[i] = std::clamp(y.data()[i] + uniform(rng, -radius, radius), 0.0, 1.0);
    best = std::max(best, l2_distance(phi(y), base));
  }
  return best;
}

void PerturbationSpec::validate() const {
  switch (kind) {
    case PerturbationKind::kNoisyBaseline:
      if (!(sigma > 0)) throw std::invalid_argument("perturbation: sigma must be positive");
      break;
    case PerturbationKind::kSquareRemoval:
      if (square_side < 1) throw std::invalid_argument("perturbation: square side must be positive");
      break;
    case PerturbationKind::kSubsetBaseline:
      if (!(subset_fraction > 0 && subset_fraction <= 1))
        throw std::invalid_argument("perturbation: subset fraction must lie in (0, 1]");
      break;
  }
}

Image sample_perturbation(const PerturbationSpec& spec, const Image& image, std::uint64_t seed) {
  Rng rng(seed);
  Image I = Image::Zero(image.rows(), image.cols());
  switch (spec.kind) {
    case PerturbationKind::kNoisyBaseline:
      for (Eigen::Index i = 0; i < I.size(); ++i) I.data()[i] = normal(rng, 0, spec.sigma);
      break;
    case PerturbationKind::kSquareRemoval: {
      const int side = std::min<int>({spec.square_side, static_cast<int>(image.rows()), static_cast<int>(image.cols())});
      const int y = uniform_int(rng, 0, static_cast<int>(image.rows()) - side);
      const int x = uniform_int(rng, 0, static_cast<int>(image.cols()) - side);
      I.block(y, x, side, side) = image.block(y, x, side, side);
      break;
    }
    case PerturbationKind::kSubsetBaseline: {
      const bool has_baseline = spec.baseline.size() > 0;
      if (has_baseline && (spec.baseline.rows() != image.rows() || spec.baseline.cols() != image.cols()))
        throw std::invalid_argument("perturbation: baseline shape differs from the image");
      for (Eigen::Index i = 0; i < I.size(); ++i)
        if (bernoulli(rng, spec.subset_fraction))
          I.data()[i] = image.data()[i] - (has_baseline ? spec.baseline.data()[i] : 0.0);
      break;
    }
  }
  return I;
}

double infidelity(const Explainer& phi, const ScoreFn& f, const Image& image, const PerturbationSpec& spec,
                  int samples, std::uint64_t seed) {
  spec.validate();
  if (samples < 1) throw std::invalid_argument("infidelity: samples must be >= 1");
  const Image explanation = phi(image);
  const double fx = f(image);
  double total = 0;
  for (int s = 0; s < samples; ++s) {
    const Image I = sample_perturbation(spec, image, mix_seed(seed, 0x1f1d, s));
    const double d = I.cwiseProduct(explanation).sum() - (fx - f(image - I));
    total += d * d;
  }
  return total / samples;
}

double model_contrast_score(const AttributionFn& attr, const Network& model_a, const Network& model_b,
                            const Image& concept_mask, std::span<const Image> images, std::span<const int> labels) {
  if (images.size() != labels.size()) throw std::invalid_argument("model_contrast_score: image/label count differs");
  if (images.empty()) throw std::invalid_argument("model_contrast_score: no images");
  const auto pa = argmax_rows(logits(model_a, images));
  const auto pb = argmax_rows(logits(model_b, images));
  double ga = 0, gb = 0;
  int kept = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (pa[i] != labels[i] || pb[i] != labels[i]) continue;
    ga += attr(model_a, images[i], labels[i]).cwiseProduct(concept_mask).sum();
    gb += attr(model_b, images[i], labels[i]).cwiseProduct(concept_mask).sum();
    ++kept;
  }
  if (kept == 0) throw std::invalid_argument("model_contrast_score: no image is classified correctly by both models");
  return (ga - gb) / kept;
}

double input_dependence_rate(const AttributionFn& attr, const Network& model, std::span<const FeaturePair> pairs,
                             const Image& feature_mask) {
  const double mask_area = feature_mask.sum();
  if (!(mask_area > 0)) throw std::invalid_argument("input_dependence_rate: empty feature mask");
  int correct = 0, hits = 0;
  for (const auto& p : pairs) {
    const Image both[] = {p.with_feature, p.without_feature};
    const auto pred = argmax_rows(logits(model, both));
    if (pred[0] != p.label || pred[1] != p.label) continue;
    ++correct;
    const double with = attr(model, p.with_feature, p.label).cwiseProduct(feature_mask).sum() / mask_area;
    const double without = attr(model, p.without_feature, p.label).cwiseProduct(feature_mask).sum() / mask_area;
    hits += with < without;
  }
  if (correct == 0) {
    warn("input_dependence_rate: no pair is classified correctly; reporting 0");
    return 0.0;
  }
  return static_cast<double>(hits) / correct;
}

}  // namespace biaslab
