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

#include "biaslab/autodiff.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

namespace biaslab::ad::gradcheck {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = u(rng);
  return t;
}

// Central differences of a scalar function of several tensors.
inline std::vector<Tensor> finite_difference(const std::function<double(const std::vector<Tensor>&)>& f,
                                      std::vector<Tensor> args, double h = 1e-5) {
  std::vector<Tensor> grads;
  for (std::size_t a = 0; a < args.size(); ++a) {
    Tensor g(args[a].shape);
    for (Eigen::Index i = 0; i < args[a].data.size(); ++i) {
      const double keep = args[a].data[i];
      args[a].data[i] = keep + h;
      const double up = f(args);
      args[a].data[i] = keep - h;
      const double down = f(args);
      args[a].data[i] = keep;
      g.data[i] = (up - down) / (2 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double relative_error(const Tensor& got, const Tensor& want) {
  const double scale = std::max(want.data.norm(), 1e-6);
  return (got.data - want.data).norm() / scale;
}

// L_atr-style objective on a 2-layer relu network: mean squared difference
// between the input gradient on a perturbed input and a fixed reference map.
inline double attribution_objective(const std::vector<Tensor>& params, const Tensor& x, const Tensor& ref) {
  Tape t;
  auto w1 = t.variable(params[0]);
  auto w2 = t.variable(params[1]);
  auto xv = t.variable(x);
  auto out = sum(matmul(relu(matmul(xv, w1)), w2));
  auto sal = t.backward(out, {xv})[0];
  return mean(square(sub(sal, t.constant(ref)))).value().item();
}

// --- property checks over the public primitive set -------------------------

struct Case {
  Primitive kind;
  std::vector<Tensor> args;
};

inline bool near_kink(const Case& c) {
  constexpr double kMargin = 1e-3;
  if (c.kind == Primitive::kRelu)
    return (c.args[0].data.array().abs() < kMargin).any();
  if (c.kind == Primitive::kMaxPool2x2) {
    const Tensor& x = c.args[0];
    const int h = x.shape[2], w = x.shape[3];
    for (int p = 0; p < x.shape[0] * x.shape[1]; ++p)
      for (int y = 0; y < h; y += 2)
        for (int xx = 0; xx < w; xx += 2) {
          std::vector<double> v;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) v.push_back(x.data[p * h * w + (y + dy) * w + xx + dx]);
          std::sort(v.begin(), v.end());
          if (v[3] - v[2] < kMargin) return true;
        }
  }
  return false;
}

inline Case random_case(std::mt19937_64& rng, Primitive kind) {
  std::uniform_int_distribution<int> dim(1, 4);
  Case c{kind, {}};
  switch (kind) {
    case Primitive::kAdd:
    case Primitive::kSub:
    case Primitive::kMul: {
      Shape s{dim(rng), dim(rng)};
      c.args = {random_tensor(rng, s), random_tensor(rng, s)};
      break;
    }
    case Primitive::kMatmul: {
      int n = dim(rng), k = dim(rng), m = dim(rng);
      c.args = {random_tensor(rng, {n, k}), random_tensor(rng, {k, m})};
      break;
    }
    case Primitive::kConv2d: {
      int n = dim(rng) % 2 + 1, ci = dim(rng) % 3 + 1, o = dim(rng) % 3 + 1, h = dim(rng) + 2, w = dim(rng) + 2;
      c.args = {random_tensor(rng, {n, ci, h, w}), random_tensor(rng, {o, ci, 3, 3})};
      break;
    }
    case Primitive::kMaxPool2x2:
      c.args = {random_tensor(rng, {dim(rng) % 2 + 1, dim(rng) % 2 + 1, 2 * dim(rng), 2 * dim(rng)})};
      break;
    case Primitive::kLog:
      c.args = {random_tensor(rng, {dim(rng), dim(rng)}, 0.5, 2.0)};
      break;
    case Primitive::kSoftmax:
      c.args = {random_tensor(rng, {dim(rng), dim(rng) + 1}, -2, 2)};
      break;
    default:
      c.args = {random_tensor(rng, {dim(rng), dim(rng), dim(rng)})};
      break;
  }
  return c;
}

}  // namespace biaslab::ad::gradcheck
