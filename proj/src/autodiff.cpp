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

#include "biaslab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace biaslab::ad {
namespace {

#ifdef __GLIBC__
// Tapes allocate and free multi-megabyte buffers every batch. Keeping them
// on the heap instead of fresh mmap pages removes most of the page-fault
// cost.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

constexpr double kLogFloor = 1e-12;

[[noreturn]] void shape_error(std::string_view prim, const Shape& a, const Shape& b,
                              std::string_view why = {}) {
  std::ostringstream os;
  os << prim << ": incompatible shapes " << to_string(a) << " and " << to_string(b);
  if (!why.empty()) os << " (" << why << ")";
  throw std::invalid_argument(os.str());
}

[[noreturn]] void shape_error(std::string_view prim, const Shape& a, std::string_view why) {
  std::ostringstream os;
  os << prim << ": invalid shape " << to_string(a) << " (" << why << ")";
  throw std::invalid_argument(os.str());
}

Tape* same_tape(Var a, Var b, std::string_view prim) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument(std::string(prim) + ": null variable");
  if (a.tape != b.tape) throw std::invalid_argument(std::string(prim) + ": variables on different tapes");
  return a.tape;
}

Tape* tape_of(Var a, std::string_view prim) {
  if (!a.valid()) throw std::invalid_argument(std::string(prim) + ": null variable");
  return a.tape;
}

bool is_scalar(const Shape& s) { return s.empty(); }

Shape broadcast_shape(std::string_view prim, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (is_scalar(a)) return b;
  if (is_scalar(b)) return a;
  shape_error(prim, a, b, "only scalar-tensor broadcasting is supported");
}

Node make(Op op, std::vector<int> inputs) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  return n;
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F f) {
  if (a.shape == b.shape) return Tensor(a.shape, a.data.binaryExpr(b.data, f));
  if (is_scalar(a.shape)) {
    const double s = a.data[0];
    return Tensor(b.shape, b.data.unaryExpr([&](double v) { return f(s, v); }));
  }
  const double s = b.data[0];
  return Tensor(a.shape, a.data.unaryExpr([&](double v) { return f(v, s); }));
}

// Rows of the im2col matrix are (c, ky, kx); columns are output positions.
void im2col(const double* x, int channels, int h, int w, int k, RowMatrix& cols) {
  const int pad = k / 2;
  cols.resize(channels * k * k, h * w);
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::ptrdiff_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.data() + static_cast<std::ptrdiff_t>((c * k + ky) * k + kx) * h * w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - pad;
            row[y * w + xx] = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? plane[sy * w + sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& cols, int channels, int h, int w, int k, double* out) {
  const int pad = k / 2;
  for (int c = 0; c < channels; ++c) {
    double* plane = out + static_cast<std::ptrdiff_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.data() + static_cast<std::ptrdiff_t>((c * k + ky) * k + kx) * h * w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - pad;
            if (sx >= 0 && sx < w) plane[sy * w + sx] += row[y * w + xx];
          }
        }
      }
    }
  }
}

// rows of a tensor viewed as [rows, last]
std::pair<int, int> row_view(const Shape& s) {
  if (s.empty()) return {1, 1};
  const int last = s.back();
  return {static_cast<int>(num_elements(s) / std::max(last, 1)), last};
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("shape " + to_string(shape) + " has a non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(Eigen::VectorXd::Zero(num_elements(shape))) {}

Tensor::Tensor(Shape s, Eigen::VectorXd d) : shape(std::move(s)), data(std::move(d)) {
  if (static_cast<std::size_t>(data.size()) != num_elements(shape))
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + to_string(shape));
}

Tensor::Tensor(Shape s, std::initializer_list<double> values)
    : Tensor(std::move(s), Eigen::Map<const Eigen::VectorXd>(values.begin(), values.size())) {}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor of shape " + to_string(shape) + " is not a scalar");
  return data[0];
}

bool Tensor::operator==(const Tensor& other) const {
  return shape == other.shape && data.size() == other.data.size() &&
         std::equal(data.data(), data.data() + data.size(), other.data.data());
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kConv2d: return "conv2d";
    case Op::kConv2dInputGrad: return "conv2d_input_grad";
    case Op::kConv2dWeightGrad: return "conv2d_weight_grad";
    case Op::kRelu: return "relu";
    case Op::kAbs: return "abs";
    case Op::kAbsGrad: return "abs_grad";
    case Op::kMaxPool2x2: return "maxpool2x2";
    case Op::kMaxUnpool2x2: return "maxunpool2x2";
    case Op::kMaxGather: return "maxgather";
    case Op::kReshape: return "reshape";
    case Op::kSoftmax: return "softmax";
    case Op::kLog: return "log";
    case Op::kReciprocal: return "reciprocal";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSquare: return "square";
    case Op::kFill: return "fill";
    case Op::kTileChannels: return "tile_channels";
    case Op::kReduceChannels: return "reduce_channels";
    case Op::kSumRows: return "sum_rows";
    case Op::kTileRows: return "tile_rows";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape->node(id).value; }
const Shape& Var::shape() const { return tape->node(id).value.shape; }

// --- kernels ---------------------------------------------------------------

namespace kernels {

Tensor conv2d(const Tensor& x, const Tensor& w) {
  const int n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const int o = w.shape[0], k = w.shape[2];
  Tensor out(Shape{n, o, h, wd});
  ConstMatrixMap wm(w.data.data(), o, c * k * k);
  RowMatrix cols;
  for (int i = 0; i < n; ++i) {
    im2col(x.data.data() + static_cast<std::ptrdiff_t>(i) * c * h * wd, c, h, wd, k, cols);
    MatrixMap(out.data.data() + static_cast<std::ptrdiff_t>(i) * o * h * wd, o, h * wd).noalias() = wm * cols;
  }
  return out;
}

Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, const Shape& input_shape) {
  const int n = g.shape[0], o = g.shape[1], h = g.shape[2], wd = g.shape[3];
  const int c = w.shape[1], k = w.shape[2];
  Tensor out(input_shape);
  ConstMatrixMap wm(w.data.data(), o, c * k * k);
  RowMatrix cols(c * k * k, h * wd);
  for (int i = 0; i < n; ++i) {
    cols.noalias() = wm.transpose() * ConstMatrixMap(g.data.data() + static_cast<std::ptrdiff_t>(i) * o * h * wd, o, h * wd);
    col2im(cols, c, h, wd, k, out.data.data() + static_cast<std::ptrdiff_t>(i) * c * h * wd);
  }
  return out;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, const Shape& weight_shape) {
  const int n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const int o = weight_shape[0], k = weight_shape[2];
  Tensor out(weight_shape);
  MatrixMap acc(out.data.data(), o, c * k * k);
  RowMatrix cols;
  for (int i = 0; i < n; ++i) {
    im2col(x.data.data() + static_cast<std::ptrdiff_t>(i) * c * h * wd, c, h, wd, k, cols);
    acc.noalias() += ConstMatrixMap(g.data.data() + static_cast<std::ptrdiff_t>(i) * o * h * wd, o, h * wd) *
                     cols.transpose();
  }
  return out;
}

Tensor maxpool2x2(const Tensor& x, std::vector<int>* winners) {
  const int n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const int ph = h / 2, pw = w / 2;
  Tensor out(Shape{n, c, ph, pw});
  if (winners) winners->resize(out.size());
  int idx = 0;
  for (int plane = 0; plane < n * c; ++plane) {
    const int base = plane * h * w;
    for (int y = 0; y < ph; ++y) {
      for (int xx = 0; xx < pw; ++xx, ++idx) {
        // Row-major scan with strict '>' keeps the first maximal element.
        int best = base + 2 * y * w + 2 * xx;
        const int cand[3] = {best + 1, best + w, best + w + 1};
        for (int q : cand)
          if (x.data[q] > x.data[best]) best = q;
        out.data[idx] = x.data[best];
        if (winners) (*winners)[idx] = best;
      }
    }
  }
  return out;
}

}  // namespace kernels

// --- tape ------------------------------------------------------------------

Var Tape::variable(Tensor value) {
  Node n;
  n.id = static_cast<int>(nodes_.size());
  n.op = Op::kLeaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Node node) {
  node.id = static_cast<int>(nodes_.size());
  std::shared_ptr<const std::vector<int>> winners;
  int clamps = 0;
  node.value = compute(node, &winners, &clamps);
  if (node.op == Op::kMaxPool2x2) node.winners = std::move(winners);
  clamped_logs_ += clamps;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::compute(const Node& node, std::shared_ptr<const std::vector<int>>* winners,
                     int* clamps) const {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[node.inputs[i]].value; };
  switch (node.op) {
    case Op::kLeaf:
      return node.value;
    case Op::kAdd:
      return binary(in(0), in(1), [](double a, double b) { return a + b; });
    case Op::kSub:
      return binary(in(0), in(1), [](double a, double b) { return a - b; });
    case Op::kMul:
      return binary(in(0), in(1), [](double a, double b) { return a * b; });
    case Op::kDiv:
      return binary(in(0), in(1), [](double a, double b) { return a / b; });
    case Op::kScale:
      return Tensor(in(0).shape, in(0).data * node.factor);
    case Op::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor out(Shape{a.shape[0], b.shape[1]});
      MatrixMap(out.data.data(), a.shape[0], b.shape[1]).noalias() =
          ConstMatrixMap(a.data.data(), a.shape[0], a.shape[1]) *
          ConstMatrixMap(b.data.data(), b.shape[0], b.shape[1]);
      return out;
    }
    case Op::kTranspose: {
      const Tensor& a = in(0);
      Tensor out(Shape{a.shape[1], a.shape[0]});
      MatrixMap(out.data.data(), a.shape[1], a.shape[0]) =
          ConstMatrixMap(a.data.data(), a.shape[0], a.shape[1]).transpose();
      return out;
    }
    case Op::kConv2d:
      return kernels::conv2d(in(0), in(1));
    case Op::kConv2dInputGrad:
      return kernels::conv2d_input_grad(in(0), in(1), node.target);
    case Op::kConv2dWeightGrad:
      return kernels::conv2d_weight_grad(in(0), in(1), node.target);
    case Op::kRelu:
      return Tensor(in(0).shape, in(0).data.cwiseMax(0.0));
    case Op::kAbs:
      return Tensor(in(0).shape, in(0).data.cwiseAbs());
    case Op::kAbsGrad:
      return Tensor(in(0).shape, in(0).data.binaryExpr(in(1).data, [](double g, double x) {
        return x > 0 ? g : (x < 0 ? -g : 0.0);
      }));
    case Op::kMaxPool2x2: {
      auto w = std::make_shared<std::vector<int>>();
      Tensor out = kernels::maxpool2x2(in(0), w.get());
      if (winners) *winners = std::move(w);
      return out;
    }
    case Op::kMaxUnpool2x2: {
      Tensor out(node.target);
      const auto& w = *node.winners;
      for (std::size_t i = 0; i < w.size(); ++i) out.data[w[i]] += in(0).data[i];
      return out;
    }
    case Op::kMaxGather: {
      Tensor out(node.target);
      const auto& w = *node.winners;
      for (std::size_t i = 0; i < w.size(); ++i) out.data[i] = in(0).data[w[i]];
      return out;
    }
    case Op::kReshape:
      return Tensor(node.target, in(0).data);
    case Op::kSoftmax: {
      const Tensor& a = in(0);
      auto [rows, cols] = row_view(a.shape);
      Tensor out(a.shape);
      ConstMatrixMap src(a.data.data(), rows, cols);
      MatrixMap dst(out.data.data(), rows, cols);
      for (int r = 0; r < rows; ++r) {
        const double m = src.row(r).maxCoeff();
        dst.row(r) = (src.row(r).array() - m).exp();
        dst.row(r) /= dst.row(r).sum();
      }
      return out;
    }
    case Op::kLog: {
      const Tensor& a = in(0);
      Tensor out(a.shape);
      for (Eigen::Index i = 0; i < a.data.size(); ++i) {
        double v = a.data[i];
        if (v < kLogFloor) {
          v = kLogFloor;
          if (clamps) ++*clamps;
        }
        out.data[i] = std::log(v);
      }
      return out;
    }
    case Op::kReciprocal:
      return Tensor(in(0).shape, in(0).data.unaryExpr([](double v) {
        if (v >= 0) return 1.0 / std::max(v, kLogFloor);
        return 1.0 / std::min(v, -kLogFloor);
      }));
    case Op::kSum:
      return Tensor::scalar(in(0).data.sum());
    case Op::kMean:
      return Tensor::scalar(in(0).data.mean());
    case Op::kSquare:
      return Tensor(in(0).shape, in(0).data.array().square().matrix());
    case Op::kFill:
      return Tensor(node.target, Eigen::VectorXd::Constant(num_elements(node.target), in(0).data[0]));
    case Op::kTileChannels: {
      Tensor out(node.target);
      const int n = node.target[0], c = node.target[1];
      const int inner = static_cast<int>(out.size() / (static_cast<std::size_t>(n) * c));
      for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
          out.data.segment((static_cast<Eigen::Index>(i) * c + ch) * inner, inner).setConstant(in(0).data[ch]);
      return out;
    }
    case Op::kReduceChannels: {
      const Tensor& a = in(0);
      const int n = a.shape[0], c = a.shape[1];
      const int inner = static_cast<int>(a.size() / (static_cast<std::size_t>(n) * c));
      Tensor out(Shape{c});
      for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
          out.data[ch] += a.data.segment((static_cast<Eigen::Index>(i) * c + ch) * inner, inner).sum();
      return out;
    }
    case Op::kSumRows: {
      const Tensor& a = in(0);
      auto [rows, cols] = row_view(a.shape);
      Tensor out(Shape{rows});
      out.data = ConstMatrixMap(a.data.data(), rows, cols).rowwise().sum();
      return out;
    }
    case Op::kTileRows: {
      auto [rows, cols] = row_view(node.target);
      Tensor out(node.target);
      MatrixMap(out.data.data(), rows, cols) = in(0).data.replicate(1, cols);
      return out;
    }
  }
  throw std::logic_error("unhandled op");
}

std::vector<Tensor> Tape::replay() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  // compute() reads inputs from nodes_, so evaluate against a scratch copy
  // whose values are progressively replaced.
  Tape scratch;
  scratch.nodes_ = nodes_;
  for (auto& n : scratch.nodes_) {
    if (n.op != Op::kLeaf) {
      std::shared_ptr<const std::vector<int>> winners;
      n.value = scratch.compute(n, &winners, nullptr);
      if (n.op == Op::kMaxPool2x2) n.winners = std::move(winners);
    }
    values.push_back(n.value);
  }
  return values;
}

std::vector<Var> Tape::backward(Var output, std::span<const Var> wrt) {
  if (!output.valid() || output.tape != this) throw std::invalid_argument("backward: output is not on this tape");
  if (output.value().size() != 1)
    throw std::invalid_argument("backward: output must be scalar, got shape " + to_string(output.shape()));
  const int top = output.id;
  std::vector<char> needs(static_cast<std::size_t>(top) + 1, 0);
  for (const Var& w : wrt) {
    if (w.tape != this) throw std::invalid_argument("backward: wrt variable is not on this tape");
    if (w.id <= top) needs[w.id] = 1;
  }
  for (int i = 0; i <= top; ++i) {
    if (needs[i]) continue;
    for (int j : nodes_[i].inputs)
      if (needs[j]) {
        needs[i] = 1;
        break;
      }
  }

  std::vector<int> cot(static_cast<std::size_t>(top) + 1, -1);
  if (needs[top]) cot[top] = fill(constant(Tensor::scalar(1.0)), output.shape()).id;
  for (int i = top; i >= 0; --i) {
    if (cot[i] < 0 || nodes_[i].op == Op::kLeaf) continue;
    const std::vector<int> inputs = nodes_[i].inputs;
    std::vector<Var> grads = vjp(i, Var{this, cot[i]}, needs);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const int j = inputs[k];
      if (!needs[j] || !grads[k].valid()) continue;
      cot[j] = cot[j] < 0 ? grads[k].id : add(Var{this, cot[j]}, grads[k]).id;
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id <= top && cot[w.id] >= 0)
      result.push_back(Var{this, cot[w.id]});
    else
      result.push_back(constant(Tensor(w.shape())));
  }
  return result;
}

std::vector<Var> Tape::vjp(int id, Var g, const std::vector<char>& needs) {
  // Copy what we need: recording new nodes may reallocate nodes_.
  const Op op = nodes_[id].op;
  const std::vector<int> inputs = nodes_[id].inputs;
  const double factor = nodes_[id].factor;
  const Shape target = nodes_[id].target;
  const auto winners = nodes_[id].winners;
  std::vector<Var> out(inputs.size());
  auto x = [&](std::size_t k) { return Var{this, inputs[k]}; };
  auto need = [&](std::size_t k) { return needs[inputs[k]] != 0; };
  auto shape_of = [&](std::size_t k) { return nodes_[inputs[k]].value.shape; };
  // Sum away scalar broadcasting.
  auto reduce_to = [&](Var grad, std::size_t k) {
    return (is_scalar(shape_of(k)) && !is_scalar(grad.shape())) ? sum(grad) : grad;
  };
  auto self = Var{this, id};

  switch (op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
      if (need(0)) out[0] = reduce_to(g, 0);
      if (need(1)) out[1] = reduce_to(g, 1);
      break;
    case Op::kSub:
      if (need(0)) out[0] = reduce_to(g, 0);
      if (need(1)) out[1] = reduce_to(scale(g, -1.0), 1);
      break;
    case Op::kMul:
      if (need(0)) out[0] = reduce_to(mul(g, x(1)), 0);
      if (need(1)) out[1] = reduce_to(mul(g, x(0)), 1);
      break;
    case Op::kDiv:
      if (need(0)) out[0] = reduce_to(div(g, x(1)), 0);
      if (need(1)) out[1] = reduce_to(scale(div(mul(g, x(0)), square(x(1))), -1.0), 1);
      break;
    case Op::kScale:
      if (need(0)) out[0] = scale(g, factor);
      break;
    case Op::kMatmul:
      if (need(0)) out[0] = matmul(g, transpose(x(1)));
      if (need(1)) out[1] = matmul(transpose(x(0)), g);
      break;
    case Op::kTranspose:
      if (need(0)) out[0] = transpose(g);
      break;
    case Op::kConv2d:
      if (need(0)) out[0] = conv2d_input_grad(g, x(1), shape_of(0));
      if (need(1)) out[1] = conv2d_weight_grad(x(0), g, shape_of(1));
      break;
    case Op::kConv2dInputGrad:  // inputs (g0, w)
      if (need(0)) out[0] = conv2d(g, x(1));
      if (need(1)) out[1] = conv2d_weight_grad(g, x(0), shape_of(1));
      break;
    case Op::kConv2dWeightGrad:  // inputs (x0, g0)
      if (need(0)) out[0] = conv2d_input_grad(x(1), g, shape_of(0));
      if (need(1)) out[1] = conv2d(x(0), g);
      break;
    case Op::kRelu:
      if (need(0)) {
        const Tensor& v = nodes_[inputs[0]].value;
        Tensor mask(v.shape, v.data.unaryExpr([](double a) { return a > 0 ? 1.0 : 0.0; }));
        out[0] = mul(g, constant(std::move(mask)));
      }
      break;
    case Op::kAbs:
      if (need(0)) out[0] = record([&] {
          Node n = make(Op::kAbsGrad, {g.id, inputs[0]});
          return n;
        }());
      break;
    case Op::kAbsGrad:
      throw std::domain_error("abs: no registered second derivative");
    case Op::kMaxPool2x2:
      if (need(0)) {
        Node n = make(Op::kMaxUnpool2x2, {g.id});
        n.target = shape_of(0);
        n.winners = winners;
        out[0] = record(std::move(n));
      }
      break;
    case Op::kMaxUnpool2x2:
      if (need(0)) {
        Node n = make(Op::kMaxGather, {g.id});
        n.target = shape_of(0);
        n.winners = winners;
        out[0] = record(std::move(n));
      }
      break;
    case Op::kMaxGather:
      if (need(0)) {
        Node n = make(Op::kMaxUnpool2x2, {g.id});
        n.target = shape_of(0);
        n.winners = winners;
        out[0] = record(std::move(n));
      }
      break;
    case Op::kReshape:
      if (need(0)) out[0] = reshape(g, shape_of(0));
      break;
    case Op::kSoftmax:
      if (need(0)) out[0] = mul(self, sub(g, tile_rows(sum_rows(mul(g, self)), shape_of(0))));
      break;
    case Op::kLog:
      if (need(0)) out[0] = mul(g, reciprocal(x(0)));
      break;
    case Op::kReciprocal:
      if (need(0)) out[0] = scale(mul(g, square(self)), -1.0);
      break;
    case Op::kSum:
      if (need(0)) out[0] = fill(g, shape_of(0));
      break;
    case Op::kMean:
      if (need(0)) out[0] = scale(fill(g, shape_of(0)), 1.0 / static_cast<double>(num_elements(shape_of(0))));
      break;
    case Op::kSquare:
      if (need(0)) out[0] = mul(g, scale(x(0), 2.0));
      break;
    case Op::kFill:
      if (need(0)) out[0] = sum(g);
      break;
    case Op::kTileChannels:
      if (need(0)) out[0] = reduce_channels(g);
      break;
    case Op::kReduceChannels:
      if (need(0)) out[0] = tile_channels(g, shape_of(0));
      break;
    case Op::kSumRows:
      if (need(0)) out[0] = tile_rows(g, shape_of(0));
      break;
    case Op::kTileRows:
      if (need(0)) out[0] = sum_rows(g);
      break;
  }
  return out;
}

// --- primitive constructors -------------------------------------------------

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b, "add");
  broadcast_shape("add", a.shape(), b.shape());
  return t->record(make(Op::kAdd, {a.id, b.id}));
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b, "sub");
  broadcast_shape("sub", a.shape(), b.shape());
  return t->record(make(Op::kSub, {a.id, b.id}));
}

Var mul(Var a, Var b) {
  Tape* t = same_tape(a, b, "mul");
  broadcast_shape("mul", a.shape(), b.shape());
  return t->record(make(Op::kMul, {a.id, b.id}));
}

Var div(Var a, Var b) {
  Tape* t = same_tape(a, b, "div");
  broadcast_shape("div", a.shape(), b.shape());
  return t->record(make(Op::kDiv, {a.id, b.id}));
}

Var scale(Var a, double factor) {
  Node n = make(Op::kScale, {a.id});
  n.factor = factor;
  return tape_of(a, "scale")->record(std::move(n));
}

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_error("matmul", sa, sb);
  return t->record(make(Op::kMatmul, {a.id, b.id}));
}

Var transpose(Var a) {
  if (a.shape().size() != 2) shape_error("transpose", a.shape(), "rank 2 required");
  return tape_of(a, "transpose")->record(make(Op::kTranspose, {a.id}));
}

Var conv2d(Var x, Var w) {
  Tape* t = same_tape(x, w, "conv2d");
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1] || sw[2] != sw[3] || sw[2] % 2 == 0)
    shape_error("conv2d", sx, sw);
  return t->record(make(Op::kConv2d, {x.id, w.id}));
}

Var conv2d_input_grad(Var g, Var w, const Shape& input_shape) {
  Tape* t = same_tape(g, w, "conv2d_input_grad");
  const Shape& sg = g.shape();
  const Shape& sw = w.shape();
  if (sg.size() != 4 || sw.size() != 4 || sg[1] != sw[0] || input_shape.size() != 4 ||
      input_shape[0] != sg[0] || input_shape[1] != sw[1] || input_shape[2] != sg[2] || input_shape[3] != sg[3])
    shape_error("conv2d_input_grad", sg, sw);
  Node n = make(Op::kConv2dInputGrad, {g.id, w.id});
  n.target = input_shape;
  return t->record(std::move(n));
}

Var conv2d_weight_grad(Var x, Var g, const Shape& weight_shape) {
  Tape* t = same_tape(x, g, "conv2d_weight_grad");
  const Shape& sx = x.shape();
  const Shape& sg = g.shape();
  if (sx.size() != 4 || sg.size() != 4 || sx[0] != sg[0] || sx[2] != sg[2] || sx[3] != sg[3] ||
      weight_shape.size() != 4 || weight_shape[0] != sg[1] || weight_shape[1] != sx[1])
    shape_error("conv2d_weight_grad", sx, sg);
  Node n = make(Op::kConv2dWeightGrad, {x.id, g.id});
  n.target = weight_shape;
  return t->record(std::move(n));
}

Var relu(Var a) { return tape_of(a, "relu")->record(make(Op::kRelu, {a.id})); }

Var abs(Var a) { return tape_of(a, "abs")->record(make(Op::kAbs, {a.id})); }

Var maxpool2x2(Var x) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0) shape_error("maxpool2x2", s, "need [N,C,H,W] with even H, W");
  return tape_of(x, "maxpool2x2")->record(make(Op::kMaxPool2x2, {x.id}));
}

Var reshape(Var a, Shape shape) {
  if (num_elements(shape) != a.value().size()) shape_error("reshape", a.shape(), shape, "element count differs");
  Node n = make(Op::kReshape, {a.id});
  n.target = std::move(shape);
  return tape_of(a, "reshape")->record(std::move(n));
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 2) shape_error("flatten", s, "need a leading batch axis");
  return reshape(x, Shape{s[0], static_cast<int>(num_elements(s) / s[0])});
}

Var softmax(Var a) {
  const Shape& s = a.shape();
  if (s.empty() || s.size() > 2) shape_error("softmax", s, "rank 1 or 2 required");
  return tape_of(a, "softmax")->record(make(Op::kSoftmax, {a.id}));
}

Var log(Var a) { return tape_of(a, "log")->record(make(Op::kLog, {a.id})); }
Var reciprocal(Var a) { return tape_of(a, "reciprocal")->record(make(Op::kReciprocal, {a.id})); }
Var sum(Var a) { return tape_of(a, "sum")->record(make(Op::kSum, {a.id})); }
Var mean(Var a) { return tape_of(a, "mean")->record(make(Op::kMean, {a.id})); }
Var square(Var a) { return tape_of(a, "square")->record(make(Op::kSquare, {a.id})); }

Var fill(Var scalar, Shape shape) {
  if (scalar.value().size() != 1) shape_error("fill", scalar.shape(), "scalar required");
  Node n = make(Op::kFill, {scalar.id});
  n.target = std::move(shape);
  num_elements(n.target);
  return tape_of(scalar, "fill")->record(std::move(n));
}

Var tile_channels(Var bias, Shape shape) {
  if (bias.shape().size() != 1 || shape.size() < 2 || shape[1] != bias.shape()[0])
    shape_error("tile_channels", bias.shape(), shape);
  Node n = make(Op::kTileChannels, {bias.id});
  n.target = std::move(shape);
  return tape_of(bias, "tile_channels")->record(std::move(n));
}

Var reduce_channels(Var a) {
  if (a.shape().size() < 2) shape_error("reduce_channels", a.shape(), "need [N,C,...]");
  return tape_of(a, "reduce_channels")->record(make(Op::kReduceChannels, {a.id}));
}

Var sum_rows(Var a) {
  const Shape& s = a.shape();
  if (s.empty() || s.size() > 2) shape_error("sum_rows", s, "rank 1 or 2 required");
  return tape_of(a, "sum_rows")->record(make(Op::kSumRows, {a.id}));
}

Var tile_rows(Var v, Shape shape) {
  if (shape.empty() || shape.size() > 2 || v.shape().size() != 1 ||
      static_cast<std::size_t>(v.shape()[0]) != num_elements(shape) / shape.back())
    shape_error("tile_rows", v.shape(), shape);
  Node n = make(Op::kTileRows, {v.id});
  n.target = std::move(shape);
  return tape_of(v, "tile_rows")->record(std::move(n));
}

Var forward_primitive(Primitive kind, std::span<const Var> args) {
  auto arity = [&](std::size_t n, std::string_view name) {
    if (args.size() != n)
      throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(n) + " arguments, got " +
                                  std::to_string(args.size()));
  };
  switch (kind) {
    case Primitive::kAdd: arity(2, "add"); return add(args[0], args[1]);
    case Primitive::kSub: arity(2, "sub"); return sub(args[0], args[1]);
    case Primitive::kMul: arity(2, "mul"); return mul(args[0], args[1]);
    case Primitive::kMatmul: arity(2, "matmul"); return matmul(args[0], args[1]);
    case Primitive::kConv2d: arity(2, "conv2d"); return conv2d(args[0], args[1]);
    case Primitive::kRelu: arity(1, "relu"); return relu(args[0]);
    case Primitive::kMaxPool2x2: arity(1, "maxpool2x2"); return maxpool2x2(args[0]);
    case Primitive::kFlatten: arity(1, "flatten"); return flatten(args[0]);
    case Primitive::kSoftmax: arity(1, "softmax"); return softmax(args[0]);
    case Primitive::kLog: arity(1, "log"); return log(args[0]);
    case Primitive::kSum: arity(1, "sum"); return sum(args[0]);
    case Primitive::kMean: arity(1, "mean"); return mean(args[0]);
    case Primitive::kSquare: arity(1, "square"); return square(args[0]);
  }
  throw std::invalid_argument("unknown primitive");
}

}  // namespace biaslab::ad
