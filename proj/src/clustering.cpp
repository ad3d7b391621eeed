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

#include "biaslab/clustering.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "biaslab/embedding.hpp"
#include "biaslab/log.hpp"
#include "biaslab/random.hpp"

namespace biaslab {
namespace {

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  c.row(0) = x.row(uniform_int(rng, 0, static_cast<int>(n) - 1));
  Eigen::VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double u = uniform(rng, 0, total);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u < 0) break;
      }
    } else {
      pick = uniform_int(rng, 0, static_cast<int>(n) - 1);
    }
    c.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }
  return c;
}

ClusterAssignment lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd c, int max_iter) {
  const Eigen::Index n = x.rows();
  const int k = static_cast<int>(c.rows());
  ClusterAssignment a;
  a.k = k;
  a.labels.assign(n, -1);
  std::vector<double> dist(n);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = (x.row(i) - c.row(j)).squaredNorm();
        if (d < bd) bd = d, best = j;
      }
      changed |= a.labels[i] != best;
      a.labels[i] = best;
      dist[i] = bd;
      inertia += bd;
    }
    a.inertia_trace.push_back(inertia);
    a.inertia = inertia;
    if (!changed) break;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> count(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) sum.row(a.labels[i]) += x.row(i), ++count[a.labels[i]];
    for (int j = 0; j < k; ++j) {
      if (count[j] > 0) {
        c.row(j) = sum.row(j) / count[j];
        continue;
      }
      // Empty cluster: move it to the worst-served point.
      const Eigen::Index far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      c.row(j) = x.row(far);
      dist[far] = 0;
    }
  }
  a.centroids = c;
  std::vector<int> count(k, 0);
  for (int l : a.labels) ++count[l];
  a.degenerate = std::count(count.begin(), count.end(), 0) > 0;
  return a;
}

// Relabel clusters by first appearance.
void canonicalize(ClusterAssignment& a) {
  std::vector<int> map(a.k, -1);
  int next = 0;
  for (int& l : a.labels) {
    if (map[l] < 0) map[l] = next++;
    l = map[l];
  }
  for (int j = 0; j < a.k; ++j)
    if (map[j] < 0) map[j] = next++;
  if (a.centroids.rows() == a.k) {
    Eigen::MatrixXd c(a.k, a.centroids.cols());
    for (int j = 0; j < a.k; ++j) c.row(map[j]) = a.centroids.row(j);
    a.centroids = c;
  }
}

}  // namespace

ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.rows())
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " exceeds n=" + std::to_string(points.rows()));
  if (restarts < 1 || max_iter < 1) throw std::invalid_argument("kmeans: restarts and max_iter must be >= 1");
  ClusterAssignment best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed + static_cast<std::uint64_t>(r));
    ClusterAssignment a = lloyd(points, plus_plus_init(points, k, rng), max_iter);
    if (r == 0 || a.inertia < best.inertia) best = std::move(a);
  }
  if (best.degenerate) warn("kmeans: at least one of " + std::to_string(k) + " clusters is empty");
  canonicalize(best);
  return best;
}

Eigen::MatrixXd knn_affinity(const Eigen::MatrixXd& points, int knn_k) {
  const Eigen::Index n = points.rows();
  if (knn_k < 1 || knn_k >= n) throw std::invalid_argument("affinity: knn_k must lie in [1, n)");
  const Eigen::MatrixXd d = euclidean_distances(points);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index p, Eigen::Index q) { return d(i, p) != d(i, q) ? d(i, p) < d(i, q) : p < q; });
    int taken = 0;
    for (Eigen::Index j : order) {
      if (j == i) continue;
      a(i, j) = a(j, i) = 1;
      if (++taken == knn_k) break;
    }
  }
  return a;
}

namespace {

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& affinity) {
  const Eigen::VectorXd deg = affinity.rowwise().sum();
  Eigen::VectorXd inv_sqrt(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i) inv_sqrt[i] = deg[i] > 0 ? 1 / std::sqrt(deg[i]) : 0;
  Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  return l;
}

}  // namespace

Eigen::VectorXd laplacian_spectrum(const Eigen::MatrixXd& affinity) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized_laplacian(affinity), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

ClusterAssignment spectral_cluster(const Eigen::MatrixXd& points, int k, int knn_k, std::uint64_t seed,
                                   int restarts) {
  if (k < 1 || k > points.rows()) throw std::invalid_argument("spectral_cluster: k must lie in [1, n]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized_laplacian(knn_affinity(points, knn_k)));
  Eigen::MatrixXd u = eig.eigenvectors().leftCols(k);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double norm = u.row(i).norm();
    if (norm > 0) u.row(i) /= norm;
  }
  ClusterAssignment a = kmeans(u, k, seed, restarts);
  a.centroids.resize(0, 0);
  return a;
}

int elbow_k(std::span<const double> inertia, int k_min) {
  int best = k_min;
  double best_value = 0;
  for (std::size_t i = 1; i + 1 < inertia.size(); ++i) {
    const double second = inertia[i - 1] - 2 * inertia[i] + inertia[i + 1];
    if (second > best_value) best_value = second, best = k_min + static_cast<int>(i);
  }
  if (best_value <= 0) warn("select_k: inertia curve has no elbow; using the smallest k");
  return best;
}

int eigengap_k(const Eigen::VectorXd& eigenvalues, int k_min, int k_max) {
  if (k_min < 1 || k_max < k_min || k_max >= eigenvalues.size())
    throw std::invalid_argument("eigengap: k range must satisfy 1 <= k_min <= k_max < n");
  int best = k_min;
  double gap = -1;
  for (int k = k_min; k <= k_max; ++k) {
    const double g = eigenvalues[k] - eigenvalues[k - 1];
    if (g > gap) gap = g, best = k;
  }
  return best;
}

int select_k(const Eigen::MatrixXd& points, int k_min, int k_max, SelectMethod method, std::uint64_t seed,
             int knn_k) {
  const int n = static_cast<int>(points.rows());
  if (k_min < 1 || k_max < k_min || k_max > n) throw std::invalid_argument("select_k: k range must lie in [1, n]");
  if (method == SelectMethod::kEigengap) {
    return eigengap_k(laplacian_spectrum(knn_affinity(points, std::min(knn_k, n - 1))), k_min,
                      std::min(k_max, n - 1));
  }
  std::vector<double> curve;
  for (int k = k_min; k <= k_max; ++k) curve.push_back(kmeans(points, k, seed).inertia);
  return elbow_k(curve, k_min);
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [it1, new1] = ab.emplace(a[i], b[i]);
    const auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

}  // namespace biaslab
