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

#ifndef IEM_LOCAL_METRIC_HPP_
#define IEM_LOCAL_METRIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iem/channel.hpp"
#include "iem/detail/parallel.hpp"
#include "iem/error.hpp"
#include "iem/iem.hpp"
#include "iem/prior.hpp"

namespace iem {

/// Local Riemannian metric G(x, Gamma) with its eigendecomposition.
struct LocalMetric {
  Matrix G;
  Vector x;
  double gamma_max = 0.0;
  /// Descending, clamped at zero.
  Vector eigenvalues;
  /// Columns match eigenvalues.
  Matrix eigenvectors;
};

/// Discrimination ellipse: radius i along column i of axes.
struct Ellipse {
  Vector center;
  Matrix axes;
  Vector radii;
};

namespace detail {

inline LocalMetric finalize_metric(Matrix g, const Vector& x, double gamma_max) {
  g = 0.5 * (g + g.transpose());
  require(g.allFinite(), ErrorCode::kNonFinite, "local metric is not finite");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  const auto d = g.rows();
  LocalMetric out{std::move(g), x, gamma_max, Vector(d), Matrix(d, d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;
    const double lambda = eig.eigenvalues()[src];
    require(lambda >= -kPsdClampTolerance, ErrorCode::kNotPSD,
            [&] { return "local metric has eigenvalue " + std::to_string(lambda); });
    out.eigenvalues[i] = std::max(lambda, 0.0);
    out.eigenvectors.col(i) = eig.eigenvectors().col(src);
  }
  return out;
}

enum class MetricForm { kHessian, kCovariance };

inline Matrix metric_integrand(const Prior& prior, const Vector& y, double gamma, MetricForm form) {
  if (form == MetricForm::kHessian) {
    const Matrix h = blurred_hessian(prior, y, gamma);
    return (gamma * gamma) * (h * h);
  }
  Matrix m = -gamma * posterior_cov(prior, y, gamma);
  m.diagonal().array() += 1.0;
  return m * m;
}

inline LocalMetric local_metric(const Prior& prior, const Vector& x, const IntegrationConfig& cfg,
                                MetricForm form) {
  check_point(prior, x, "x");
  const auto paths = make_paths(cfg, prior.dim());
  const auto d = prior.dim();
  std::vector<Matrix> per_path(paths.size(), Matrix::Zero(d, d));
  parallel_for(paths.size(), [&](std::size_t p) {
    const auto& path = paths[p];
    const auto nodes = path.grid.nodes();
    const auto weights = path.grid.weights();
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const Vector y = nodes[i] * x + path.at(i);
      per_path[p] += weights[i] * metric_integrand(prior, y, nodes[i], form);
    }
  });
  Matrix g = Matrix::Zero(d, d);
  for (const auto& m : per_path) g += m;
  g /= static_cast<double>(paths.size());
  return finalize_metric(std::move(g), x, cfg.gamma_max);
}

}  // namespace detail

/// G(x, Gamma) = int_0^Gamma g^2 E[(Hessian of log p_{y_g}(g x + w_g))^2] dg.
inline LocalMetric metric_hessian_form(const Prior& prior, const Vector& x,
                                       const IntegrationConfig& cfg = {}) {
  return detail::local_metric(prior, x, cfg, detail::MetricForm::kHessian);
}

/// G(x, Gamma) = int_0^Gamma E[(I - g Cov[x | y_g = g x + w_g])^2] dg, on the
/// same path set as metric_hessian_form for equal configs.
inline LocalMetric metric_cov_form(const Prior& prior, const Vector& x,
                                   const IntegrationConfig& cfg = {}) {
  return detail::local_metric(prior, x, cfg, detail::MetricForm::kCovariance);
}

inline constexpr double kEllipseEigenFloor = 1e-12;

/// Axes are the eigenvectors of G and radii the eigenvalues of G^{-1/2}.
inline Ellipse ellipse(const LocalMetric& metric) {
  const auto d = metric.eigenvalues.size();
  Ellipse out{metric.x, metric.eigenvectors, Vector(d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    const double lambda = metric.eigenvalues[i];
    detail::require(lambda > kEllipseEigenFloor, ErrorCode::kSingular,
                    "metric eigenvalue " + std::to_string(lambda) + " is below the floor");
    out.radii[i] = 1.0 / std::sqrt(lambda);
  }
  return out;
}

/// Averages over x ~ prior of G(x), of -Hessian log p_x(x) and of the score
/// outer product. The middle term is absent for priors with Laplace factors.
struct AverageMetricTriplet {
  Matrix metric;
  std::optional<Matrix> neg_hessian;
  Matrix score_outer;
  std::size_t n_samples = 0;
};

namespace detail {

/// SplitMix64 finalizer, used to derive per-sample seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Each sample j uses its own path set, seeded from (cfg.seed, j).
inline AverageMetricTriplet average_metric_triplet(const Prior& prior, std::size_t n_samples,
                                                   const IntegrationConfig& cfg,
                                                   std::uint64_t seed) {
  detail::require(n_samples >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  const Matrix xs = sample(prior, n_samples, seed);
  const auto d = prior.dim();
  const bool with_hessian = !prior.has_laplace();
  std::vector<Matrix> g(n_samples), h(n_samples), s(n_samples);
  detail::parallel_for(n_samples, [&](std::size_t j) {
    const Vector x = xs.row(static_cast<Eigen::Index>(j)).transpose();
    IntegrationConfig local = cfg;
    local.seed = detail::mix_seed(cfg.seed, j);
    g[j] = metric_hessian_form(prior, x, local).G;
    if (with_hessian) h[j] = -clean_hessian(prior, x);
    const Vector score = clean_score(prior, x);
    s[j] = score * score.transpose();
  });
  AverageMetricTriplet out{Matrix::Zero(d, d), std::nullopt, Matrix::Zero(d, d), n_samples};
  Matrix hsum = Matrix::Zero(d, d);
  for (std::size_t j = 0; j < n_samples; ++j) {
    out.metric += g[j];
    out.score_outer += s[j];
    if (with_hessian) hsum += h[j];
  }
  const double n = static_cast<double>(n_samples);
  out.metric /= n;
  out.score_outer /= n;
  if (with_hessian) out.neg_hessian = hsum / n;
  return out;
}

}  // namespace iem

#endif  // IEM_LOCAL_METRIC_HPP_
