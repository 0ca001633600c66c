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

#ifndef IEM_CHANNEL_HPP_
#define IEM_CHANNEL_HPP_

// SNR grids, Wiener paths sampled on them, and the log-space quadrature rule
// shared by every stochastic-integral estimator.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iem/error.hpp"

namespace iem {

/// Log-uniform SNR nodes gamma_0 = gamma_min < ... < gamma_{n-1} = gamma_max.
class SnrGrid {
 public:
  SnrGrid(double gamma_min, double gamma_max, std::size_t n_steps) {
    detail::require(std::isfinite(gamma_min) && std::isfinite(gamma_max) && gamma_min > 0.0 &&
                        gamma_min < gamma_max,
                    ErrorCode::kInvalidRange, "need 0 < gamma_min < gamma_max");
    detail::require(n_steps >= 2, ErrorCode::kInvalidRange, "need at least 2 grid nodes");
    const double t0 = std::log(gamma_min);
    log_step_ = (std::log(gamma_max) - t0) / static_cast<double>(n_steps - 1);
    nodes_.resize(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
      nodes_[i] = std::exp(t0 + static_cast<double>(i) * log_step_);
    }
    nodes_.front() = gamma_min;
    nodes_.back() = gamma_max;
    weights_.resize(n_steps);
    for (std::size_t i = 0; i + 1 < n_steps; ++i) weights_[i] = nodes_[i] * log_step_;
    weights_.back() = 0.0;
  }

  double gamma_min() const { return nodes_.front(); }
  double gamma_max() const { return nodes_.back(); }
  std::size_t size() const { return nodes_.size(); }
  /// Uniform spacing in log gamma.
  double log_step() const { return log_step_; }
  std::span<const double> nodes() const { return nodes_; }
  double operator[](std::size_t i) const { return nodes_[i]; }
  /// Quadrature weight gamma_i * dt of node i; the last node carries none.
  std::span<const double> weights() const { return weights_; }

  /// Every stride-th node, which is again log-uniform.
  SnrGrid coarsen(std::size_t stride) const {
    detail::require(stride >= 1 && (size() - 1) % stride == 0, ErrorCode::kInvalidRange,
                    "stride must divide the number of intervals");
    return SnrGrid(gamma_min(), gamma_max(), (size() - 1) / stride + 1);
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double log_step_ = 0.0;
};

inline SnrGrid make_grid(double gamma_min, double gamma_max, std::size_t n_steps) {
  return SnrGrid(gamma_min, gamma_max, n_steps);
}

/// One realization of the Wiener process w_gamma at the grid nodes (rows).
struct BrownianPath {
  SnrGrid grid;
  Eigen::MatrixXd w;  // size() x d

  Eigen::Index dim() const { return w.cols(); }
  Eigen::VectorXd at(std::size_t i) const { return w.row(static_cast<Eigen::Index>(i)).transpose(); }
};

/// Independent streams drawn from the same seed.
enum class PathStream : std::uint32_t { kPrimary = 0, kSecondary = 1 };

namespace detail {

inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_index,
                                   PathStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32),
                    static_cast<std::uint32_t>(stream), 0x1e3a5u};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Deterministic in (grid, d, seed, path_index, stream): every path has its
/// own engine, so paths can be generated in any order or concurrently.
inline BrownianPath sample_path(const SnrGrid& grid, Eigen::Index d, std::uint64_t seed,
                                std::uint64_t path_index = 0,
                                PathStream stream = PathStream::kPrimary) {
  detail::require(d >= 1, ErrorCode::kInvalidArgument, "path dimension must be >= 1");
  auto rng = detail::path_engine(seed, path_index, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  BrownianPath path{grid, Eigen::MatrixXd(static_cast<Eigen::Index>(grid.size()), d)};
  const auto nodes = grid.nodes();
  double sd = std::sqrt(nodes[0]);
  for (Eigen::Index c = 0; c < d; ++c) path.w(0, c) = sd * normal(rng);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    sd = std::sqrt(nodes[i] - nodes[i - 1]);
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index c = 0; c < d; ++c) path.w(r, c) = path.w(r - 1, c) + sd * normal(rng);
  }
  return path;
}

/// The same realization restricted to every stride-th node.
inline BrownianPath subsample(const BrownianPath& path, std::size_t stride) {
  SnrGrid coarse = path.grid.coarsen(stride);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(coarse.size()), path.dim());
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    w.row(static_cast<Eigen::Index>(i)) = path.w.row(static_cast<Eigen::Index>(i * stride));
  }
  return {std::move(coarse), std::move(w)};
}

/// Left-endpoint rule in log gamma: sum_{i < n-1} g_i gamma_i dt ~ int g dgamma.
inline double integrate(const SnrGrid& grid, std::span<const double> values) {
  detail::require(values.size() == grid.size(), ErrorCode::kDimensionMismatch,
                  "need one value per grid node");
  const auto w = grid.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    detail::require(std::isfinite(values[i]), ErrorCode::kNonFinite,
                    [&] { return "integrand is not finite at node " + std::to_string(i); });
    acc += values[i] * w[i];
  }
  detail::require(std::isfinite(values.back()), ErrorCode::kNonFinite,
                  "integrand is not finite at the last node");
  return acc;
}

}  // namespace iem

#endif  // IEM_CHANNEL_HPP_
