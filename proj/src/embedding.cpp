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

#include "biaslab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "biaslab/log.hpp"

namespace biaslab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  int to;
  double w;
};

std::vector<int> components(const std::vector<std::vector<Edge>>& graph, int* count) {
  const int n = static_cast<int>(graph.size());
  std::vector<int> comp(n, -1);
  int c = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& e : graph[u])
        if (comp[e.to] < 0) comp[e.to] = c, stack.push_back(e.to);
    }
    ++c;
  }
  *count = c;
  return comp;
}

void dijkstra(const std::vector<std::vector<Edge>>& graph, int source, double* out) {
  const int n = static_cast<int>(graph.size());
  std::fill(out, out + n, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  out[source] = 0;
  heap.push({0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > out[u]) continue;
    for (const auto& e : graph[u]) {
      const double nd = d + e.w;
      if (nd < out[e.to]) {
        out[e.to] = nd;
        heap.push({nd, e.to});
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
  return d;
}

Geodesics knn_geodesics(const Eigen::MatrixXd& points, int k) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw std::invalid_argument("knn_geodesics: k must be >= 1");
  if (n < k + 1) throw std::invalid_argument("knn_geodesics: need more than k points");
  const Eigen::MatrixXd euclid = euclidean_distances(points);
  std::vector<std::vector<char>> linked(n, std::vector<char>(n, 0));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return euclid(i, a) != euclid(i, b) ? euclid(i, a) < euclid(i, b) : a < b;
    });
    int taken = 0;
    for (int j : order) {
      if (j == i) continue;
      linked[i][j] = linked[j][i] = 1;
      if (++taken == k) break;
    }
  }
  std::vector<std::vector<Edge>> graph(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (linked[i][j]) graph[i].push_back({j, euclid(i, j)});

  Geodesics g;
  for (;;) {
    int count = 0;
    const auto comp = components(graph, &count);
    if (count <= 1) break;
    double best = kInf;
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (comp[i] != comp[j] && euclid(i, j) < best) best = euclid(i, j), bi = i, bj = j;
    graph[bi].push_back({bj, best});
    graph[bj].push_back({bi, best});
    ++g.repairs;
  }
  if (g.repairs > 0) warn("knn_geodesics: k-NN graph was disconnected; added " + std::to_string(g.repairs) + " bridging edge(s)");

  g.distances.resize(n, n);
  std::vector<double> row(n);
  for (int s = 0; s < n; ++s) {
    dijkstra(graph, s, row.data());
    for (int t = 0; t < n; ++t) g.distances(s, t) = row[t];
  }
  // Both directions share one path length up to summation order.
  g.distances = (0.5 * (g.distances + g.distances.transpose())).eval();
  return g;
}

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int dims) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw std::invalid_argument("classical_mds: distance matrix must be square");
  if (dims < 1) throw std::invalid_argument("classical_mds: target dimension must be >= 1");
  if (!distances.allFinite()) throw std::invalid_argument("classical_mds: distances must be finite");
  const Eigen::MatrixXd sq = distances.array().square().matrix();
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const Eigen::VectorXd col_mean = sq.colwise().mean().transpose();
  const double mean = sq.mean();
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = -0.5 * (sq(i, j) - row_mean[i] - col_mean[j] + mean);
  b = (0.5 * (b + b.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) throw std::runtime_error("classical_mds: eigensolver failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, dims);
  int positive = 0;
  for (int c = 0; c < dims && c < n; ++c) {
    const Eigen::Index idx = n - 1 - c;
    const double lambda = values[idx];
    if (lambda <= 1e-12 * scale) continue;
    ++positive;
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;  // fixed sign for reproducible output
    out.col(c) = v * std::sqrt(lambda);
  }
  if (positive < dims && n > 1 && distances.maxCoeff() > 0)
    warn("classical_mds: only " + std::to_string(positive) + " positive eigenvalue(s) for " + std::to_string(dims) +
         " dimensions; padding with zeros");
  return out;
}

Eigen::MatrixXd isomap(const Eigen::MatrixXd& points, const EmbeddingConfig& cfg, int* repairs) {
  if (cfg.target_dims < 1 || cfg.target_dims >= points.rows())
    throw std::invalid_argument("isomap: target_dims must lie in [1, n)");
  const Geodesics g = knn_geodesics(points, cfg.k_neighbors);
  if (repairs) *repairs = g.repairs;
  return classical_mds(g.distances, cfg.target_dims);
}

Eigen::VectorXd downscale(const Image& image, int side) {
  const Eigen::Index rows = image.rows(), cols = image.cols();
  if (side < 1 || side > rows || side > cols) throw std::invalid_argument("downscale: side must lie in [1, image side]");
  // Overlap of source cell [i, i+1) with target cell [o*step, (o+1)*step).
  auto weights = [side](Eigen::Index extent) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(side, extent);
    const double step = static_cast<double>(extent) / side;
    for (int o = 0; o < side; ++o) {
      const double lo = o * step, hi = (o + 1) * step;
      for (Eigen::Index i = static_cast<Eigen::Index>(lo); i < extent && i < hi; ++i)
        w(o, i) = (std::min<double>(hi, i + 1) - std::max<double>(lo, i)) / step;
    }
    return w;
  };
  const Eigen::MatrixXd pooled = weights(rows) * image * weights(cols).transpose();
  Eigen::VectorXd out(side * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) out[r * side + c] = pooled(r, c);
  return out;
}

}  // namespace biaslab
