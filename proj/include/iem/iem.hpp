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

#ifndef IEM_IEM_HPP_
#define IEM_IEM_HPP_

// Monte Carlo estimators of the information-estimation distance
//
//   IEM^2(x1, x2, G) = int_0^G E || s_g(g x1 + w_g) - s_g(g x2 + w_g) ||^2 dg,
//
// where s_g is the score of the blurred density, plus the f-reweighted and
// mismatched-prior variants. By default both points see the same Brownian
// path, so for a fixed path set the estimate is the squared Euclidean
// distance between two score trajectories; symmetry, zero self-distance and
// the triangle inequality then hold exactly, not just in expectation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iem/channel.hpp"
#include "iem/detail/parallel.hpp"
#include "iem/error.hpp"
#include "iem/prior.hpp"

namespace iem {

/// Whether x1 and x2 share one Brownian path per sample.
enum class Coupling { kShared, kIndependent };

struct IntegrationConfig {
  double gamma_min = 1.0 / 1024.0;
  double gamma_max = 1024.0;
  std::size_t n_steps = 512;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  Coupling coupling = Coupling::kShared;

  void validate() const {
    detail::require(std::isfinite(gamma_min) && std::isfinite(gamma_max) && gamma_min > 0.0 &&
                        gamma_min < gamma_max,
                    ErrorCode::kInvalidRange, "need 0 < gamma_min < gamma_max");
    detail::require(n_steps >= 2, ErrorCode::kInvalidRange, "steps must be >= 2");
    detail::require(n_paths >= 1, ErrorCode::kInvalidArgument, "paths must be >= 1");
  }

  SnrGrid grid() const {
    validate();
    return SnrGrid(gamma_min, gamma_max, n_steps);
  }
};

/// cfg.n_paths paths of dimension d, keyed by (cfg.seed, path index, stream).
inline std::vector<BrownianPath> make_paths(const IntegrationConfig& cfg, Eigen::Index d,
                                            PathStream stream = PathStream::kPrimary) {
  const SnrGrid grid = cfg.grid();
  std::vector<BrownianPath> paths;
  paths.reserve(cfg.n_paths);
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    paths.push_back(sample_path(grid, d, cfg.seed, p, stream));
  }
  return paths;
}

struct DistanceEstimate {
  double value = 0.0;
  double squared_value = 0.0;
  /// Standard error of squared_value over paths; zero for a single path.
  double std_error = 0.0;
  /// Path-averaged integrand at each grid node.
  std::vector<double> integrand_trace;
};

/// Derivative f'(z, gamma) of the reweighting function in the generalized distance.
class FPrime {
 public:
  using Fn = std::function<double(double z, double gamma)>;

  FPrime(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  /// f(z) = z.
  static FPrime identity() {
    return FPrime("identity", [](double, double) { return 1.0; });
  }
  /// f(z) = z^2.
  static FPrime square() {
    return FPrime("square", [](double z, double) { return 2.0 * z; });
  }

  double operator()(double z, double gamma) const { return fn_(z, gamma); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

namespace detail {

/// Score trajectory of one point along one path: column i holds s_{g_i}(g_i x + w_i).
struct PathFeatures {
  Matrix scores;
  std::vector<double> log_density;
};

inline PathFeatures path_features(const Prior& prior, const Vector& x, const BrownianPath& path) {
  const auto nodes = path.grid.nodes();
  PathFeatures f{Matrix(prior.dim(), static_cast<Eigen::Index>(nodes.size())),
                 std::vector<double>(nodes.size())};
  Vector y(prior.dim());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    y = nodes[i] * x + path.w.row(static_cast<Eigen::Index>(i)).transpose();
    const BlurredEval e = blurred_eval(prior, y, nodes[i], Derivatives::kScore);
    f.scores.col(static_cast<Eigen::Index>(i)) = e.score;
    f.log_density[i] = e.log_density;
  }
  return f;
}

inline double squared_distance(const double* a, const double* b, Eigen::Index d) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

/// Left-endpoint log-space integral of ||s1 - s2||^2 (times f'(z)^2 when
/// fprime is set). Adds the per-node integrand into trace when non-empty.
inline double pair_integral(const SnrGrid& grid, const PathFeatures& a, const PathFeatures& b,
                            const FPrime* fprime, std::span<double> trace) {
  const auto weights = grid.weights();
  const auto nodes = grid.nodes();
  const Eigen::Index d = a.scores.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    double g = squared_distance(a.scores.col(col).data(), b.scores.col(col).data(), d);
    if (fprime != nullptr) {
      const double slope = (*fprime)(a.log_density[i] - b.log_density[i], nodes[i]);
      g *= slope * slope;
    }
    require(std::isfinite(g), ErrorCode::kNonFinite,
            [&] { return "integrand is not finite at node " + std::to_string(i); });
    if (!trace.empty()) trace[i] += g;
    if (i + 1 < nodes.size()) acc += g * weights[i];
  }
  return acc;
}

inline void check_paths(std::span<const BrownianPath> paths, Eigen::Index d) {
  require(!paths.empty(), ErrorCode::kInvalidArgument, "at least one path required");
  for (const auto& p : paths) {
    require(p.dim() == d, ErrorCode::kDimensionMismatch, "path dimension differs from prior");
    require(static_cast<std::size_t>(p.w.rows()) == p.grid.size(), ErrorCode::kDimensionMismatch,
            "path length differs from its grid");
  }
}

/// Mean and standard error of per-path integrals.
inline DistanceEstimate summarize(const std::vector<double>& per_path, std::vector<double> trace) {
  const auto n = static_cast<double>(per_path.size());
  DistanceEstimate out;
  double sum = 0.0;
  for (double v : per_path) sum += v;
  out.squared_value = sum / n;
  if (per_path.size() >= 2) {
    double ss = 0.0;
    for (double v : per_path) ss += (v - out.squared_value) * (v - out.squared_value);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  out.value = std::sqrt(std::max(out.squared_value, 0.0));
  for (auto& t : trace) t /= n;
  out.integrand_trace = std::move(trace);
  return out;
}

}  // namespace detail

/// General estimator: x1 evaluated under prior_a along paths_a[p], x2 under
/// prior_b along paths_b[p]. Passing the same span twice gives the coupled
/// estimator. All other estimators are thin wrappers over this one.
inline DistanceEstimate estimate_squared(const Prior& prior_a, const Prior& prior_b,
                                         const Vector& x1, const Vector& x2,
                                         std::span<const BrownianPath> paths_a,
                                         std::span<const BrownianPath> paths_b,
                                         const FPrime* fprime = nullptr) {
  const auto d = prior_a.dim();
  detail::require(prior_b.dim() == d, ErrorCode::kDimensionMismatch, "priors differ in dimension");
  detail::check_point(prior_a, x1, "x1");
  detail::check_point(prior_b, x2, "x2");
  detail::check_paths(paths_a, d);
  detail::check_paths(paths_b, d);
  detail::require(paths_a.size() == paths_b.size(), ErrorCode::kInvalidArgument,
                  "path sets differ in size");
  const SnrGrid& grid = paths_a.front().grid;
  std::vector<double> per_path(paths_a.size());
  std::vector<std::vector<double>> traces(paths_a.size(), std::vector<double>(grid.size(), 0.0));
  detail::parallel_for(paths_a.size(), [&](std::size_t p) {
    detail::require(paths_b[p].grid.size() == grid.size(), ErrorCode::kDimensionMismatch,
                    "paths use different grids");
    const auto fa = detail::path_features(prior_a, x1, paths_a[p]);
    const auto fb = detail::path_features(prior_b, x2, paths_b[p]);
    per_path[p] = detail::pair_integral(grid, fa, fb, fprime, traces[p]);
  });
  std::vector<double> trace(grid.size(), 0.0);
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.size(); ++i) trace[i] += t[i];
  }
  return detail::summarize(per_path, std::move(trace));
}

namespace detail {

inline DistanceEstimate estimate_with_config(const Prior& prior_a, const Prior& prior_b,
                                             const Vector& x1, const Vector& x2,
                                             const IntegrationConfig& cfg, const FPrime* fprime) {
  const auto paths = make_paths(cfg, prior_a.dim(), PathStream::kPrimary);
  if (cfg.coupling == Coupling::kShared) {
    return estimate_squared(prior_a, prior_b, x1, x2, paths, paths, fprime);
  }
  const auto other = make_paths(cfg, prior_a.dim(), PathStream::kSecondary);
  return estimate_squared(prior_a, prior_b, x1, x2, paths, other, fprime);
}

}  // namespace detail

/// log p_a(g x1 + w) - log p_b(g x2 + w) at every node of the path.
inline std::vector<double> z_process(const Prior& prior_a, const Prior& prior_b, const Vector& x1,
                                     const Vector& x2, const BrownianPath& path) {
  detail::require(prior_b.dim() == prior_a.dim(), ErrorCode::kDimensionMismatch,
                  "priors differ in dimension");
  detail::check_point(prior_a, x1, "x1");
  detail::check_point(prior_b, x2, "x2");
  detail::check_paths(std::span<const BrownianPath>(&path, 1), prior_a.dim());
  const auto nodes = path.grid.nodes();
  std::vector<double> z(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Vector w = path.at(i);
    z[i] = blurred_log_density(prior_a, nodes[i] * x1 + w, nodes[i]) -
           blurred_log_density(prior_b, nodes[i] * x2 + w, nodes[i]);
  }
  return z;
}

inline DistanceEstimate iem_squared(const Prior& prior, const Vector& x1, const Vector& x2,
                                    const IntegrationConfig& cfg = {}) {
  return detail::estimate_with_config(prior, prior, x1, x2, cfg, nullptr);
}

inline double iem(const Prior& prior, const Vector& x1, const Vector& x2,
                  const IntegrationConfig& cfg = {}) {
  return iem_squared(prior, x1, x2, cfg).value;
}

/// Integrand reweighted by f'(z_g, g)^2 with z_g the log-ratio process.
inline DistanceEstimate iem_f(const Prior& prior, const Vector& x1, const Vector& x2,
                              const FPrime& fprime, const IntegrationConfig& cfg = {}) {
  return detail::estimate_with_config(prior, prior, x1, x2, cfg, &fprime);
}

/// x1 is read under prior_a and x2 under prior_b.
inline DistanceEstimate mismatched_iem(const Prior& prior_a, const Prior& prior_b,
                                       const Vector& x1, const Vector& x2,
                                       const IntegrationConfig& cfg = {}) {
  return detail::estimate_with_config(prior_a, prior_b, x1, x2, cfg, nullptr);
}

/// Pairwise distances between the rows of points. One path set, drawn from
/// cfg, serves every pair, so the matrix is exactly symmetric and each entry
/// equals iem(prior, row_i, row_j, cfg) bit for bit.
inline Matrix distance_matrix(const Prior& prior, const Matrix& points,
                              const IntegrationConfig& cfg = {}) {
  const auto n = static_cast<std::size_t>(points.rows());
  detail::require(n >= 2, ErrorCode::kInvalidArgument, "need at least two points");
  detail::require(points.cols() == prior.dim(), ErrorCode::kDimensionMismatch,
                  "point dimension differs from prior");
  detail::require(cfg.coupling == Coupling::kShared, ErrorCode::kUnsupported,
                  "distance matrices are only defined for shared paths");
  const auto paths = make_paths(cfg, prior.dim());
  const SnrGrid& grid = paths.front().grid;
  std::vector<std::vector<detail::PathFeatures>> features(n);
  detail::parallel_for(n, [&](std::size_t i) {
    const Vector x = points.row(static_cast<Eigen::Index>(i)).transpose();
    detail::check_point(prior, x, "point");
    features[i].reserve(paths.size());
    for (const auto& path : paths) features[i].push_back(detail::path_features(prior, x, path));
  });
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  detail::parallel_for(n, [&](std::size_t i) {
    std::vector<double> per_path(paths.size());
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t p = 0; p < paths.size(); ++p) {
        per_path[p] = detail::pair_integral(grid, features[i][p], features[j][p], nullptr, {});
      }
      const double v = detail::summarize(per_path, {}).value;
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  });
  return out;
}

}  // namespace iem

#endif  // IEM_IEM_HPP_
