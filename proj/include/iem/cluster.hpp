// Copyright 2026 The IEM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IEM_CLUSTER_HPP_
#define IEM_CLUSTER_HPP_

// Voronoi-iteration K-medoids over a precomputed distance matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iem/error.hpp"

namespace iem {

struct ClusteringResult {
  /// Point index of each cluster's medoid, ascending.
  std::vector<std::size_t> medoid_indices;
  /// Cluster index (into medoid_indices) of every point.
  std::vector<int> assignments;
  double total_cost = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// total_cost after each assignment step.
  std::vector<double> cost_history;
};

inline constexpr double kSymmetryTolerance = 1e-9;

inline void validate_distance_matrix(const Eigen::MatrixXd& d) {
  detail::require(d.rows() == d.cols() && d.rows() >= 1, ErrorCode::kInvalidMatrix,
                  "distance matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    detail::require(d(i, i) == 0.0, ErrorCode::kInvalidMatrix,
                    [&] { return "diagonal entry " + std::to_string(i) + " is not zero"; });
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      detail::require(std::isfinite(d(i, j)) && d(i, j) >= 0.0, ErrorCode::kInvalidMatrix,
                      [&] {
                        return "entry (" + std::to_string(i) + "," + std::to_string(j) +
                               ") is negative or not finite";
                      });
      detail::require(std::abs(d(i, j) - d(j, i)) <= kSymmetryTolerance, ErrorCode::kInvalidMatrix,
                      [&] {
                        return "matrix is not symmetric at (" + std::to_string(i) + "," +
                               std::to_string(j) + ")";
                      });
    }
  }
}

namespace detail {

/// Nearest medoid per point; ties go to the lowest medoid index and every
/// medoid keeps itself.
inline double assign(const Eigen::MatrixXd& dist, const std::vector<std::size_t>& medoids,
                     std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(dist.rows());
  double cost = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      if (medoids[c] == p) {
        best = static_cast<int>(c);
        best_d = 0.0;
        break;
      }
      const double v = dist(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(medoids[c]));
      if (v < best_d) {
        best_d = v;
        best = static_cast<int>(c);
      }
    }
    labels[p] = best;
    cost += best_d;
  }
  return cost;
}

}  // namespace detail

inline ClusteringResult kmedoids(const Eigen::MatrixXd& dist, std::size_t k, std::uint64_t seed,
                                 std::size_t max_iter = 100) {
  validate_distance_matrix(dist);
  const auto n = static_cast<std::size_t>(dist.rows());
  detail::require(k >= 1 && k <= n, ErrorCode::kBadK,
                  "k must lie in [1, " + std::to_string(n) + "]");

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> medoids;
  medoids.reserve(k);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(medoids), static_cast<std::ptrdiff_t>(k),
              rng);
  std::sort(medoids.begin(), medoids.end());

  ClusteringResult out;
  std::vector<int> labels(n, -1);
  double cost = detail::assign(dist, medoids, labels);
  out.cost_history.push_back(cost);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    // Update: each medoid moves to the in-cluster point of least summed distance.
    std::vector<std::size_t> next(k);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t p = 0; p < n; ++p) {
        if (labels[p] == static_cast<int>(c)) members.push_back(p);
      }
      std::size_t best = medoids[c];
      double best_sum = std::numeric_limits<double>::infinity();
      for (std::size_t cand : members) {
        double sum = 0.0;
        for (std::size_t m : members) {
          sum += dist(static_cast<Eigen::Index>(cand), static_cast<Eigen::Index>(m));
        }
        if (sum < best_sum) {
          best_sum = sum;
          best = cand;
        }
      }
      next[c] = best;
    }
    std::sort(next.begin(), next.end());
    std::vector<int> next_labels(n, -1);
    const double next_cost = detail::assign(dist, next, next_labels);
    out.cost_history.push_back(next_cost);
    const bool stable = next == medoids && next_labels == labels;
    medoids = std::move(next);
    labels = std::move(next_labels);
    cost = next_cost;
    if (stable) {
      out.converged = true;
      break;
    }
  }
  out.medoid_indices = std::move(medoids);
  out.assignments = std::move(labels);
  out.total_cost = cost;
  return out;
}

inline constexpr std::size_t kMaxAccuracyClusters = 6;

/// Best agreement between two labelings over all permutations of the k labels.
inline double accuracy(const std::vector<int>& assignments, const std::vector<int>& truth,
                       std::size_t k) {
  detail::require(assignments.size() == truth.size() && !truth.empty(),
                  ErrorCode::kInvalidArgument, "labelings must be non-empty and equal length");
  detail::require(k <= kMaxAccuracyClusters, ErrorCode::kTooManyClusters,
                  "exhaustive matching supports k <= 6");
  const int kk = static_cast<int>(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    detail::require(assignments[i] >= 0 && assignments[i] < kk && truth[i] >= 0 && truth[i] < kk,
                    ErrorCode::kInvalidArgument, "labels must lie in [0, k)");
  }
  std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++confusion[static_cast<std::size_t>(assignments[i])][static_cast<std::size_t>(truth[i])];
  }
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t agree = 0;
    for (std::size_t c = 0; c < k; ++c) agree += confusion[c][perm[c]];
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace iem

#endif  // IEM_CLUSTER_HPP_
