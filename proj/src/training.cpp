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

#include "biaslab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "biaslab/errors.hpp"
#include "biaslab/random.hpp"

namespace biaslab {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw std::invalid_argument("train: lr_decay must lie in (0, 1]");
}

double cross_entropy(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, int* clamped) {
  if (p.rows() < 1 || p.rows() != y.rows() || p.cols() != y.cols())
    throw std::invalid_argument("cross_entropy: probabilities and labels differ in shape");
  double total = 0;
  int clamps = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("cross_entropy: probability row " + std::to_string(i) + " does not sum to 1");
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (y(i, c) == 0) continue;
      double v = p(i, c);
      if (v < 1e-12) {
        v = 1e-12;
        ++clamps;
      }
      total -= y(i, c) * std::log(v);
    }
  }
  if (clamped) *clamped = clamps;
  return total / static_cast<double>(p.rows());
}

ad::Var cross_entropy_from_logits(ad::Var logits, ad::Var onehot) {
  const double n = logits.shape()[0];
  return ad::scale(ad::sum(ad::mul(onehot, ad::log(ad::softmax(logits)))), -1.0 / n);
}

ad::Tensor one_hot(std::span<const int> labels, int classes) {
  ad::Tensor t(ad::Shape{static_cast<int>(labels.size()), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(labels[i]) + " out of range");
    t.data[i * classes + labels[i]] = 1.0;
  }
  return t;
}

TrainResult train(Network model, const Dataset& data, const TrainConfig& cfg, const Augment& augment) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  if (data.num_classes != model.num_classes())
    throw std::invalid_argument("train: model has " + std::to_string(model.num_classes()) + " classes, data has " +
                                std::to_string(data.num_classes));
  const auto& first = data.samples.front().image;
  for (const auto& s : data.samples)
    if (s.image.rows() != first.rows() || s.image.cols() != first.cols())
      throw std::invalid_argument("train: images differ in shape");

  TrainResult result;
  {
    const auto images = data.images();
    const auto labels = data.labels();
    const auto y = one_hot(labels, model.num_classes());
    Eigen::MatrixXd onehot = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(
        y.data.data(), labels.size(), model.num_classes());
    result.initial_loss = cross_entropy(probabilities(model, images), onehot);
  }

  Rng shuffle_rng(mix_seed(cfg.seed, 0x5eed));
  std::vector<std::size_t> order(data.size());
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<Image> images;
      std::vector<int> labels;
      images.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        const Sample& s = data.samples[idx];
        images.push_back(augment ? augment(s.image, mix_seed(cfg.seed, epoch + 1, idx)) : s.image);
        labels.push_back(s.label);
      }
      ad::Tape tape;
      auto params = model.bind(tape);
      auto x = tape.constant(to_batch(images));
      auto y = tape.constant(one_hot(labels, model.num_classes()));
      auto loss = cross_entropy_from_logits(model.forward(tape, params, x), y);
      const double value = loss.value().item();
      if (!std::isfinite(value))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));
      std::vector<ad::Var> wrt;
      std::vector<std::string> names;
      for (const auto& [name, v] : params) {
        wrt.push_back(v);
        names.push_back(name);
      }
      auto grads = tape.backward(loss, wrt);
      for (std::size_t k = 0; k < names.size(); ++k)
        model.params()[names[k]].data -= lr * grads[k].value().data;
      result.clamped_logs += tape.clamped_logs();
      ++result.updates;
      loss_sum += value * static_cast<double>(n);
      seen += n;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    lr *= cfg.lr_decay;
  }
  result.model = std::move(model);
  return result;
}

double EvalReport::macro_f1() const {
  if (per_class.empty()) return 0;
  double s = 0;
  for (const auto& c : per_class) s += c.f1;
  return s / static_cast<double>(per_class.size());
}

EvalReport report_from_confusion(const Eigen::MatrixXi& confusion) {
  EvalReport r;
  r.confusion = confusion;
  const int m = static_cast<int>(confusion.rows());
  const long total = confusion.sum();
  long correct = 0;
  for (int c = 0; c < m; ++c) {
    const long tp = confusion(c, c);
    correct += tp;
    const long predicted = confusion.col(c).sum();
    const long actual = confusion.row(c).sum();
    ClassMetrics cm;
    cm.precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    cm.recall = actual > 0 ? static_cast<double>(tp) / actual : 0.0;
    cm.f1 = (cm.precision + cm.recall) > 0 ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    r.per_class.push_back(cm);
  }
  r.accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  return r;
}

EvalReport report_from_predictions(std::span<const int> labels, std::span<const int> predictions, int classes) {
  if (labels.size() != predictions.size()) throw std::invalid_argument("evaluate: label/prediction count differs");
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) ++confusion(labels[i], predictions[i]);
  return report_from_confusion(confusion);
}

EvalReport evaluate(const Network& model, const Dataset& data) {
  if (model.num_classes() != data.num_classes)
    throw std::invalid_argument("evaluate: model and dataset class counts differ");
  const auto images = data.images();
  const auto labels = data.labels();
  const auto preds = images.empty() ? std::vector<int>{} : argmax_rows(logits(model, images));
  return report_from_predictions(labels, preds, data.num_classes);
}

}  // namespace biaslab
