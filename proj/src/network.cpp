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

#include "biaslab/network.hpp"

#include <cmath>
#include <stdexcept>

#include "biaslab/random.hpp"

namespace biaslab {

Network::Network(int rows, int cols, std::vector<Layer> layers, ParamMap params)
    : rows_(rows), cols_(cols), layers_(std::move(layers)), params_(std::move(params)) {
  if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("network: input size must be positive");
  if (layers_.empty() || layers_.back().kind != LayerKind::kDense)
    throw std::invalid_argument("network: last layer must be dense");
  for (const auto& l : layers_) {
    if (l.kind == LayerKind::kConv2d || l.kind == LayerKind::kDense) {
      if (!params_.count(l.name + ".weight")) throw std::invalid_argument("network: missing " + l.name + ".weight");
      if (l.bias && !params_.count(l.name + ".bias")) throw std::invalid_argument("network: missing " + l.name + ".bias");
    }
  }
}

int Network::num_classes() const { return layers_.back().out; }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

bool Network::has_layer(const std::string& name) const {
  for (const auto& l : layers_)
    if (l.name == name) return true;
  return false;
}

BoundParams Network::bind(ad::Tape& tape) const {
  BoundParams out;
  for (const auto& [name, t] : params_) out.emplace(name, tape.variable(t));
  return out;
}

ad::Var Network::forward(ad::Tape& tape, const BoundParams& p, ad::Var x, Activations* acts) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != rows_ || s[3] != cols_)
    throw std::invalid_argument("network: expected input [N,1," + std::to_string(rows_) + "," +
                                std::to_string(cols_) + "], got " + ad::to_string(s));
  ad::Var h = x;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::kNormalize:
        h = ad::scale(ad::sub(h, tape.constant(ad::Tensor::scalar(l.shift))), l.gain);
        break;
      case LayerKind::kConv2d:
        h = ad::conv2d(h, p.at(l.name + ".weight"));
        if (l.bias) h = ad::add(h, ad::tile_channels(p.at(l.name + ".bias"), h.shape()));
        break;
      case LayerKind::kRelu:
        h = ad::relu(h);
        break;
      case LayerKind::kMaxPool2x2:
        h = ad::maxpool2x2(h);
        break;
      case LayerKind::kFlatten:
        h = ad::flatten(h);
        break;
      case LayerKind::kDense:
        h = ad::matmul(h, p.at(l.name + ".weight"));
        if (l.bias) h = ad::add(h, ad::tile_channels(p.at(l.name + ".bias"), h.shape()));
        break;
    }
    if (acts) (*acts)[l.name] = h;
  }
  return h;
}

ParamMap init_params(const std::vector<Layer>& layers, std::uint64_t seed) {
  ParamMap params;
  Rng rng(seed);
  for (const auto& l : layers) {
    ad::Shape wshape;
    double fan_in = 0, fan_out = 0;
    if (l.kind == LayerKind::kConv2d) {
      wshape = {l.out, l.in, 3, 3};
      fan_in = l.in * 9.0;
      fan_out = l.out * 9.0;
    } else if (l.kind == LayerKind::kDense) {
      wshape = {l.in, l.out};
      fan_in = l.in;
      fan_out = l.out;
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    ad::Tensor w(wshape);
    for (auto& v : w.data) v = uniform(rng, -limit, limit);
    params.emplace(l.name + ".weight", std::move(w));
    if (l.bias) params.emplace(l.name + ".bias", ad::Tensor(ad::Shape{l.out}));
  }
  return params;
}

Network make_tiny_cnn(int side, int classes, std::uint64_t seed) {
  if (side < 4 || side % 4 != 0) throw std::invalid_argument("tiny cnn: side must be a positive multiple of 4");
  if (classes < 2) throw std::invalid_argument("tiny cnn: need at least two classes");
  const int flat = 16 * (side / 4) * (side / 4);
  std::vector<Layer> layers = {
      {LayerKind::kNormalize, "input", 1, 1, false, 0.5, 2.0},
      {LayerKind::kConv2d, "conv1", 1, 8},   {LayerKind::kRelu, "relu1"},
      {LayerKind::kMaxPool2x2, "pool1"},     {LayerKind::kConv2d, "conv2", 8, 16},
      {LayerKind::kRelu, "relu2"},           {LayerKind::kMaxPool2x2, "pool2"},
      {LayerKind::kFlatten, "flatten"},      {LayerKind::kDense, "fc1", flat, 32},
      {LayerKind::kRelu, "relu3"},           {LayerKind::kDense, "fc2", 32, classes},
  };
  ParamMap params = init_params(layers, seed);
  return Network(side, side, std::move(layers), std::move(params));
}

Network make_mlp(int rows, int cols, const std::vector<int>& hidden, int classes, std::uint64_t seed, bool bias) {
  std::vector<Layer> layers = {{LayerKind::kFlatten, "flatten"}};
  int in = rows * cols;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers.push_back({LayerKind::kDense, "fc" + std::to_string(i + 1), in, hidden[i], bias});
    layers.push_back({LayerKind::kRelu, "relu" + std::to_string(i + 1)});
    in = hidden[i];
  }
  layers.push_back({LayerKind::kDense, "fc" + std::to_string(hidden.size() + 1), in, classes, bias});
  ParamMap params = init_params(layers, seed);
  return Network(rows, cols, std::move(layers), std::move(params));
}

ad::Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("to_batch: no images");
  const int rows = static_cast<int>(images.front().rows());
  const int cols = static_cast<int>(images.front().cols());
  ad::Tensor t(ad::Shape{static_cast<int>(images.size()), 1, rows, cols});
  const Eigen::Index plane = static_cast<Eigen::Index>(rows) * cols;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rows() != rows || images[i].cols() != cols)
      throw std::invalid_argument("to_batch: images differ in size");
    t.data.segment(static_cast<Eigen::Index>(i) * plane, plane) = flatten(images[i]);
  }
  return t;
}

Image from_batch(const ad::Tensor& batch, int index) {
  const int rows = batch.shape[2], cols = batch.shape[3];
  const Eigen::Index plane = static_cast<Eigen::Index>(rows) * cols * batch.shape[1];
  Image img(rows, cols);
  Eigen::Map<Eigen::VectorXd>(img.data(), img.size()) = batch.data.segment(index * plane, rows * cols);
  return img;
}

Eigen::MatrixXd logits(const Network& net, std::span<const Image> images, int batch_size) {
  Eigen::MatrixXd out(images.size(), net.num_classes());
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, images.size() - start);
    ad::Tape tape;
    auto params = net.bind(tape);
    auto y = net.forward(tape, params, tape.constant(to_batch(images.subspan(start, n))));
    const auto& v = y.value();
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < net.num_classes(); ++c) out(start + i, c) = v.data[i * net.num_classes() + c];
  }
  return out;
}

Eigen::MatrixXd probabilities(const Network& net, std::span<const Image> images, int batch_size) {
  Eigen::MatrixXd z = logits(net, images, batch_size);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - m).exp();
    z.row(r) /= z.row(r).sum();
  }
  return z;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(scores.rows());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = static_cast<int>(c);
    out[r] = best;
  }
  return out;
}

}  // namespace biaslab
