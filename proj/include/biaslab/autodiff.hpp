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

// Reverse-mode automatic differentiation over dense row-major tensors.
//
// Every primitive records a node on a Tape. Backward passes are themselves
// recorded with the same primitives, so a gradient can be differentiated
// again (double backprop). Broadcasting is limited to rank-0 scalars
// combined with tensors; anything else needs an explicit reshape or tile.

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace biaslab::ad {

using Shape = std::vector<int>;

std::string to_string(const Shape& shape);
std::size_t num_elements(const Shape& shape);

struct Tensor {
  Shape shape;
  Eigen::VectorXd data;

  Tensor() : data(Eigen::VectorXd::Zero(1)) {}
  explicit Tensor(Shape s);
  Tensor(Shape s, Eigen::VectorXd d);
  Tensor(Shape s, std::initializer_list<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, Eigen::VectorXd::Constant(1, v)); }

  std::size_t size() const { return static_cast<std::size_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  double item() const;
  bool operator==(const Tensor& other) const;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kMatmul,
  kTranspose,
  kConv2d,
  kConv2dInputGrad,
  kConv2dWeightGrad,
  kRelu,
  kAbs,
  kAbsGrad,
  kMaxPool2x2,
  kMaxUnpool2x2,
  kMaxGather,
  kReshape,
  kSoftmax,
  kLog,
  kReciprocal,
  kSum,
  kMean,
  kSquare,
  kFill,
  kTileChannels,
  kReduceChannels,
  kSumRows,
  kTileRows,
};

std::string_view op_name(Op op);

struct Node {
  int id = -1;
  Op op = Op::kLeaf;
  std::vector<int> inputs;
  Tensor value;
  double factor = 0.0;                             // kScale
  Shape target;                                    // reshape / fill / tile / unpool / conv grads
  std::shared_ptr<const std::vector<int>> winners; // maxpool argmax, flat input offsets
};

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. The distinction is documentary; gradients may be requested for
  // any node.
  Var variable(Tensor value);
  Var constant(Tensor value) { return variable(std::move(value)); }

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  // d output / d wrt, recorded on this tape. Output must hold one element.
  std::vector<Var> backward(Var output, std::span<const Var> wrt);
  std::vector<Var> backward(Var output, std::initializer_list<Var> wrt) {
    return backward(output, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  // Same traversal as backward(); named separately for call sites that
  // differentiate a scalar built from earlier backward() results. Throws
  // std::domain_error naming any primitive without a second derivative.
  std::vector<Var> grad_of_grad(Var scalar_of_gradient, std::span<const Var> wrt) {
    return backward(scalar_of_gradient, wrt);
  }

  // Recomputes every non-leaf value from the stored leaves.
  std::vector<Tensor> replay() const;

  // Number of log() evaluations whose argument was clamped to 1e-12.
  int clamped_logs() const { return clamped_logs_; }

  Var record(Node node);

 private:
  std::vector<Var> vjp(int id, Var cotangent, const std::vector<char>& needs);
  Tensor compute(const Node& node, std::shared_ptr<const std::vector<int>>* winners,
                 int* clamps) const;

  std::vector<Node> nodes_;
  int clamped_logs_ = 0;
};

// --- primitives -----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var matmul(Var a, Var b);  // [n,k] x [k,m]
Var transpose(Var a);      // rank 2
// x: [N,C,H,W], w: [O,C,K,K] with K odd; stride 1, zero padding K/2.
Var conv2d(Var x, Var w);
Var conv2d_input_grad(Var g, Var w, const Shape& input_shape);
Var conv2d_weight_grad(Var x, Var g, const Shape& weight_shape);
Var relu(Var a);
Var abs(Var a);
Var maxpool2x2(Var x);  // [N,C,H,W] with even H, W
Var reshape(Var a, Shape shape);
Var flatten(Var x);  // [N, ...] -> [N, prod(...)]
Var softmax(Var a);  // over the last axis; rank 1 or 2
Var log(Var a);      // argument clamped to >= 1e-12
Var reciprocal(Var a);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var fill(Var scalar, Shape shape);
Var tile_channels(Var bias, Shape shape);  // [C] -> [N,C,...]
Var reduce_channels(Var a);                // [N,C,...] -> [C]
Var sum_rows(Var a);                       // [N,M] -> [N]; [M] -> [1]
Var tile_rows(Var v, Shape shape);         // inverse of sum_rows

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

// Names accepted by forward_primitive(): the public primitive set.
enum class Primitive {
  kAdd, kSub, kMul, kMatmul, kConv2d, kRelu, kMaxPool2x2, kFlatten,
  kSoftmax, kLog, kSum, kMean, kSquare,
};
Var forward_primitive(Primitive kind, std::span<const Var> args);

// Raw kernels, shared with explainers that propagate relevance directly.
namespace kernels {
Tensor conv2d(const Tensor& x, const Tensor& w);
Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, const Shape& input_shape);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, const Shape& weight_shape);
Tensor maxpool2x2(const Tensor& x, std::vector<int>* winners);
}  // namespace kernels

}  // namespace biaslab::ad
