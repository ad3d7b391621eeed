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


#include "biaslab/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "biaslab/errors.hpp"
#include "biaslab/io.hpp"
#include "biaslab/random.hpp"

namespace biaslab {
namespace {

int stage(TransformKind kind) {
  switch (kind) {
    case TransformKind::kHair:
    case TransformKind::kRuler:
      return 0;
    case TransformKind::kCircle:
      return 1;
    case TransformKind::kFrame:
      return 2;
    default:
      return 3;
  }
}

std::vector<Image> transformed(const Dataset& data, const BiasTransform& t, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(data.size());
  for (const auto& s : data.samples) out.push_back(t.apply(s.image, mix_seed(seed, hash_id(s.id)), &s.annotation));
  return out;
}

EvalReport evaluate_images(const Network& model, std::span<const Image> images, std::span<const int> labels) {
  const Eigen::MatrixXd p = probabilities(model, images);
  std::vector<int> predicted(images.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&predicted[i]);
  return report_from_predictions(labels, predicted, model.num_classes());
}

void check_compatible(const Network& model, const Dataset& data, const char* what) {
  if (data.empty()) throw std::invalid_argument(std::string(what) + ": dataset is empty");
  if (data.num_classes != model.num_classes())
    throw std::invalid_argument(std::string(what) + ": model and dataset disagree on the class count");
}

}  // namespace

void AugmentationPolicy::validate() const {
  for (const auto& e : entries) {
    if (!(e.probability >= 0 && e.probability <= 1))
      throw std::invalid_argument("policy: probability " + std::to_string(e.probability) + " outside [0, 1]");
    if (e.transform.kind == TransformKind::kCoverObject)
      throw std::invalid_argument("policy: cover_object needs annotations and cannot be used for augmentation");
    if ((e.transform.kind == TransformKind::kHair || e.transform.kind == TransformKind::kRuler) &&
        !e.transform.stamps)
      throw std::invalid_argument("policy: stamp transform without a stamp bank");
  }
}

AugmentationPolicy AugmentationPolicy::single(BiasTransform transform, double probability) {
  AugmentationPolicy p;
  p.entries.push_back({std::move(transform), probability});
  p.validate();
  return p;
}

Image apply_policy(const Image& image, const AugmentationPolicy& policy, std::uint64_t seed, std::vector<bool>* fired) {
  const std::size_t n = policy.entries.size();
  std::vector<bool> fires(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = policy.entries[i].probability;
    if (p <= 0) continue;
    Rng rng(mix_seed(seed, i, 0xf1));
    fires[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stage(policy.entries[a].transform.kind) < stage(policy.entries[b].transform.kind);
  });
  Image out = image;
  for (std::size_t i : order)
    if (fires[i]) out = policy.entries[i].transform.apply(out, mix_seed(seed, i, 0xa7));
  if (fired) *fired = std::move(fires);
  return out;
}

TrainResult tda_train(Network model, const Dataset& data, const AugmentationPolicy& policy, const TrainConfig& cfg) {
  policy.validate();
  const bool active =
      std::any_of(policy.entries.begin(), policy.entries.end(), [](const auto& e) { return e.probability > 0; });
  if (!active) return train(std::move(model), data, cfg);
  return train(std::move(model), data, cfg,
               [&policy](const Image& img, std::uint64_t seed) { return apply_policy(img, policy, seed); });
}

TdaEvaluation tda_evaluate(const Network& model, const Dataset& test, const BiasTransform& transform,
                           std::uint64_t seed) {
  check_compatible(model, test, "tda_evaluate");
  TdaEvaluation r;
  const auto images = test.images();
  const auto labels = test.labels();
  r.original = evaluate_images(model, images, labels);
  r.augmented = evaluate_images(model, transformed(test, transform, seed), labels);
  r.f1_org = r.original.macro_f1();
  r.f1_aug = r.augmented.macro_f1();
  r.f1_mean = 0.5 * (r.f1_org + r.f1_aug);
  r.cbi = run_cbi(model, test, transform, seed);
  return r;
}

std::vector<TdaSweepRow> tda_sweep(const ModelFactory& init, const Dataset& train_data, const Dataset& test,
                                   const BiasTransform& train_transform, const BiasTransform& test_transform,
                                   const TdaSweepConfig& cfg) {
  if (cfg.probabilities.empty() || cfg.seeds.empty())
    throw std::invalid_argument("tda_sweep: need at least one probability and one seed");
  std::vector<TdaSweepRow> rows;
  for (double p : cfg.probabilities) {
    const auto policy = AugmentationPolicy::single(train_transform, p);
    for (std::uint64_t seed : cfg.seeds) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      const auto trained = tda_train(init(seed), train_data, policy, tc);
      const auto ev = tda_evaluate(trained.model, test, test_transform, seed);
      rows.push_back({std::string(transform_name(train_transform.kind)), p, seed, ev.f1_org, ev.f1_aug, ev.f1_mean,
                      ev.cbi.switched_total, ev.cbi.mean_change, ev.cbi.median_change, ev.cbi.max_change});
    }
  }
  return rows;
}

std::string tda_sweep_csv(const std::vector<TdaSweepRow>& rows) {
  std::ostringstream os;
  os << "policy,p,seed,f1_org,f1_aug,f1_mean,switched,mean_change,median_change,max_change\n";
  for (const auto& r : rows)
    os << r.policy << ',' << io::format_double(r.probability) << ',' << r.seed << ',' << io::format_double(r.f1_org) << ','
       << io::format_double(r.f1_aug) << ',' << io::format_double(r.f1_mean) << ',' << r.switched << ','
       << io::format_double(r.mean_change) << ',' << io::format_double(r.median_change) << ','
       << io::format_double(r.max_change) << '\n';
  return os.str();
}

double attribution_loss(const AttributionMap& original, const AttributionMap& biased) {
  const auto& a = original.signed_values;
  const auto& b = biased.signed_values;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("attribution_loss: maps differ in shape");
  if (a.size() == 0) throw std::invalid_argument("attribution_loss: empty maps");
  return (a - b).array().square().mean();
}

ad::Var attribution_loss(ad::Var original, ad::Var biased) {
  if (original.shape() != biased.shape()) throw std::invalid_argument("attribution_loss: maps differ in shape");
  return ad::mean(ad::square(ad::sub(original, biased)));
}

void FeedbackConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("feedback: alpha must lie in [0, 1]");
  train.validate();
  if (transform.kind == TransformKind::kCoverObject)
    throw std::invalid_argument("feedback: cover_object is not an artifact to ignore");
}

FeedbackResult feedback_finetune(Network model, const Dataset& data, const FeedbackConfig& cfg) {
  cfg.validate();
  check_compatible(model, data, "feedback");
  const TrainConfig& tc = cfg.train;
  const int classes = model.num_classes();

  FeedbackResult result;
  Rng shuffle_rng(mix_seed(tc.seed, 0x5eed));
  std::vector<std::size_t> order(data.size());
  double lr = tc.learning_rate;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0, cls_sum = 0, atr_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += tc.batch_size, ++batch) {
      const std::size_t n = std::min<std::size_t>(tc.batch_size, order.size() - start);
      std::vector<Image> clean, biased;
      std::vector<int> labels;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        const Sample& s = data.samples[idx];
        clean.push_back(s.image);
        biased.push_back(cfg.transform.apply(s.image, mix_seed(tc.seed, epoch + 1, idx), &s.annotation));
        labels.push_back(s.label);
      }

      ad::Tape tape;
      auto params = model.bind(tape);
      std::optional<ad::Var> cls, atr;
      if (cfg.alpha < 1) {
        auto x = tape.constant(to_batch(cfg.cls_input == ClsInput::kBiased ? biased : clean));
        auto y = tape.constant(one_hot(labels, classes));
        cls = cross_entropy_from_logits(model.forward(tape, params, x), y);
      }
      if (cfg.alpha > 0) {
        ad::Tensor target;
        {
          ad::Tape frozen;
          auto fp = model.bind(frozen);
          target = signed_saliency(frozen, model, fp, frozen.variable(to_batch(clean)), labels).value();
        }
        auto xb = tape.variable(to_batch(biased));
        auto rb = signed_saliency(tape, model, params, xb, labels);
        if (cfg.normalize_maps) {
          double ms = 0;
          for (double v : target.data) ms += v * v;
          ms /= static_cast<double>(target.data.size());
          if (ms > 0) {
            const double inv = 1.0 / std::sqrt(ms);
            for (double& v : target.data) v *= inv;
            rb = ad::scale(rb, inv);
          }
        }
        atr = attribution_loss(tape.constant(std::move(target)), rb);
      }
      ad::Var loss = !atr ? *cls : !cls ? *atr : ad::add(ad::scale(*cls, 1 - cfg.alpha), ad::scale(*atr, cfg.alpha));
      const double value = loss.value().item();
      if (!std::isfinite(value))
        throw NumericError("feedback: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));

      std::vector<ad::Var> wrt;
      std::vector<std::string> names;
      for (const auto& [name, v] : params) {
        wrt.push_back(v);
        names.push_back(name);
      }
      auto grads = tape.backward(loss, wrt);
      for (std::size_t k = 0; k < names.size(); ++k) model.params()[names[k]].data -= lr * grads[k].value().data;
      ++result.updates;
      loss_sum += value * static_cast<double>(n);
      if (cls) cls_sum += cls->value().item() * static_cast<double>(n);
      if (atr) atr_sum += atr->value().item() * static_cast<double>(n);
      seen += n;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    result.epoch_cls.push_back(cls_sum / static_cast<double>(seen));
    result.epoch_atr.push_back(atr_sum / static_cast<double>(seen));
    lr *= tc.lr_decay;
  }
  result.model = std::move(model);
  return result;
}

double mean_attribution_loss(const Network& model, const Dataset& data, const BiasTransform& transform,
                             std::uint64_t seed, bool normalize, int batch_size) {
  check_compatible(model, data, "mean_attribution_loss");
  if (batch_size < 1) throw std::invalid_argument("mean_attribution_loss: batch_size must be >= 1");
  const auto clean = data.images();
  const auto biased = transformed(data, transform, seed);
  const auto labels = data.labels();
  const auto r = saliency_batch(model, clean, labels, batch_size);
  const auto rb = saliency_batch(model, biased, labels, batch_size);
  double total = 0, scale = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    total += (r[i] - rb[i]).array().square().mean();
    scale += r[i].array().square().mean();
  }
  if (normalize && scale > 0) return total / scale;
  return total / static_cast<double>(r.size());
}

}  // namespace biaslab
