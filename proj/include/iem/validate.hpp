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

#ifndef IEM_VALIDATE_HPP_
#define IEM_VALIDATE_HPP_

// Identity checks with independent oracles. Each check is deterministic
// given its inputs and returns a CheckReport that passes iff the measured
// value lies inside [lower, tolerance] (either bound may be absent).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iem/channel.hpp"
#include "iem/cluster.hpp"
#include "iem/iem.hpp"
#include "iem/io.hpp"
#include "iem/local_metric.hpp"
#include "iem/presets.hpp"
#include "iem/prior.hpp"

namespace iem::validate {

using json = io::json;

struct CheckReport {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::optional<double> lower;
  /// Upper bound on measured.
  std::optional<double> tolerance;
  json config = json::object();
  json details = json::object();
};

inline CheckReport make_report(std::string name, double measured, std::optional<double> lower,
                               std::optional<double> tolerance, json config,
                               json details = json::object()) {
  CheckReport r{std::move(name), false, measured, lower, tolerance, std::move(config),
                std::move(details)};
  r.passed = std::isfinite(measured) && (!lower || measured >= *lower) &&
             (!tolerance || measured <= *tolerance);
  return r;
}

inline json to_json(const CheckReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"name", r.name},          {"passed", r.passed},   {"measured", r.measured},
              {"lower", opt(r.lower)},   {"tolerance", opt(r.tolerance)},
              {"config", r.config},      {"details", r.details}};
}

inline json to_json(const std::vector<CheckReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) out.push_back(to_json(r));
  return out;
}

inline bool all_passed(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed; });
}

namespace detail {

using iem::detail::require;

/// ||a - b||_F relative to the mean of the two norms.
inline double relative_frobenius(const Matrix& a, const Matrix& b) {
  const double scale = 0.5 * (a.norm() + b.norm());
  const double diff = (a - b).norm();
  return scale > 0.0 ? diff / scale : diff;
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with column signs fixed by diag(R).
inline Matrix random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

inline Matrix random_signed_permutation(Eigen::Index d, std::mt19937_64& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution flip(0.5);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) a(i, perm[static_cast<std::size_t>(i)]) = flip(rng) ? -1.0 : 1.0;
  return a;
}

inline double log_gaussian_noise(const Vector& w, double gamma) {
  const auto d = static_cast<double>(w.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi * gamma) + w.squaredNorm() / gamma);
}

struct ImmseSides {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_error() const { return std::abs(lhs - rhs) / (1.0 + std::abs(lhs)); }
};

/// -log p_{y_G}(G x + w_G) against the discretized stochastic integral
///   L_0 + sum_i e_i . dw_i + 1/2 sum_i |e_i|^2 dg_i - log p_w(w_G),
/// with e_i = x - denoise(g_i x + w_i, g_i) taken at left endpoints and L_0
/// the exact log-likelihood ratio log p_w(w_0) - log p_y(g_0 x + w_0) that
/// stands in for the integral over [0, g_0].
inline ImmseSides immse_sides(const Prior& prior, const Vector& x, const BrownianPath& path) {
  const auto nodes = path.grid.nodes();
  const std::size_t n = nodes.size();
  const double g_last = nodes[n - 1];
  const Vector w_last = path.at(n - 1);
  ImmseSides out;
  out.lhs = -blurred_log_density(prior, g_last * x + w_last, g_last);
  const Vector w0 = path.at(0);
  double rhs = log_gaussian_noise(w0, nodes[0]) - blurred_log_density(prior, nodes[0] * x + w0, nodes[0]);
  Vector w = w0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vector w_next = path.at(i + 1);
    const Vector e = x - denoise(prior, nodes[i] * x + w, nodes[i]);
    rhs += e.dot(w_next - w) + 0.5 * e.squaredNorm() * (nodes[i + 1] - nodes[i]);
    w = w_next;
  }
  out.rhs = rhs - log_gaussian_noise(w_last, g_last);
  return out;
}

/// 1D or 2D tensor-product trapezoid rule over a box covering +-8 standard
/// deviations of every component.
inline double kl_quadrature(const Prior& prior, const Vector& s, std::size_t nodes_per_axis) {
  const auto d = prior.dim();
  require(d <= 2, ErrorCode::kUnsupported, "quadrature KL is only available for d <= 2");
  require(nodes_per_axis >= 3, ErrorCode::kInvalidArgument, "need at least 3 quadrature nodes");
  Vector lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  const auto extend = [&](const Vector& center, const Vector& sd) {
    lo = lo.cwiseMin(center - 8.0 * sd);
    hi = hi.cwiseMax(center + 8.0 * sd);
  };
  const auto visit_leaf = [&](const auto& leaf) {
    using T = std::decay_t<decltype(leaf)>;
    if constexpr (std::is_same_v<T, GaussianPrior>) {
      extend(leaf.mean(), leaf.cov().diagonal().cwiseSqrt());
    } else {
      extend(leaf.location(), std::numbers::sqrt2 * leaf.scale());
    }
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixturePrior>) {
          for (const auto& c : p.components()) std::visit(visit_leaf, c);
        } else {
          visit_leaf(p);
        }
      },
      prior.rep());
  const std::size_t m = nodes_per_axis;
  const Vector h = (hi - lo) / static_cast<double>(m - 1);
  const auto weight = [&](std::size_t i) { return (i == 0 || i + 1 == m) ? 0.5 : 1.0; };
  const auto term = [&](const Vector& x) {
    const double lp = log_density(prior, x);
    const double p = std::exp(lp);
    return p > 0.0 ? p * (lp - log_density(prior, x + s)) : 0.0;
  };
  std::vector<double> rows(d == 1 ? 1 : m, 0.0);
  iem::detail::parallel_for(rows.size(), [&](std::size_t r) {
    Vector x(d);
    double acc = 0.0;
    if (d == 2) x[1] = lo[1] + static_cast<double>(r) * h[1];
    for (std::size_t i = 0; i < m; ++i) {
      x[0] = lo[0] + static_cast<double>(i) * h[0];
      acc += weight(i) * term(x);
    }
    rows[r] = acc * h[0] * (d == 2 ? weight(r) * h[1] : 1.0);
  });
  double total = 0.0;
  for (double v : rows) total += v;
  return total;
}

inline json vector_json(const Vector& v) { return io::to_json(v); }

}  // namespace detail

/// KL(p || p(. + s)): closed form 1/2 s^T Sigma^{-1} s for a Gaussian, grid
/// quadrature otherwise.
inline double kl_shift(const Prior& prior, const Vector& s, std::size_t nodes_per_axis = 2001) {
  detail::require(s.size() == prior.dim(), ErrorCode::kDimensionMismatch, "shift dimension");
  if (const auto* g = std::get_if<GaussianPrior>(&prior.rep())) {
    return 0.5 * s.dot(g->cov().ldlt().solve(s));
  }
  return detail::kl_quadrature(prior, s, nodes_per_axis);
}

/// max over pairs of |IEM^2 - d^T Sigma^{-1} d| / (d^T Sigma^{-1} d).
inline CheckReport check_mahalanobis(const Vector& mean, const Matrix& cov,
                                     const std::vector<std::pair<Vector, Vector>>& pairs,
                                     const IntegrationConfig& cfg, double tolerance = 0.03) {
  detail::require(!pairs.empty(), ErrorCode::kInvalidArgument, "need at least one pair");
  const Prior prior = Prior::gaussian(mean, cov);
  const auto solver = cov.ldlt();
  double worst = 0.0;
  json rows = json::array();
  for (const auto& [a, b] : pairs) {
    const Vector delta = a - b;
    const double target = delta.dot(solver.solve(delta));
    const DistanceEstimate est = iem_squared(prior, a, b, cfg);
    const double rel = std::abs(est.squared_value - target) / target;
    worst = std::max(worst, rel);
    rows.push_back({{"target", target}, {"estimate", est.squared_value}, {"stderr", est.std_error},
                    {"relative_error", rel}});
  }
  json config{{"integration", io::to_json(cfg)}, {"pairs", pairs.size()}};
  return make_report("mahalanobis", worst, std::nullopt, tolerance, std::move(config),
                     json{{"pairs", rows}});
}

/// For positive semi-definite Sigma, IEM^2(x, x + delta, G) at each G in
/// gammas. The noise cancels between the two points of a Gaussian pair, so
/// the integrand |(g Sigma + I)^{-1} delta|^2 is evaluated directly. Passes
/// when every step up in G grows the value by at least half the G ratio.
inline CheckReport check_mahalanobis_divergence(const Matrix& cov, const Vector& delta,
                                                const IntegrationConfig& cfg,
                                                const std::vector<double>& gammas = {16.0, 128.0,
                                                                                     1024.0}) {
  const auto d = cov.rows();
  detail::require(cov.cols() == d && delta.size() == d, ErrorCode::kDimensionMismatch,
                  "cov and delta dimensions differ");
  detail::require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorCode::kInvalidPrior,
                  "cov: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  detail::require(eig.eigenvalues().minCoeff() >= -1e-12, ErrorCode::kInvalidPrior,
                  "cov: matrix is not positive semi-definite");
  detail::require(gammas.size() >= 2, ErrorCode::kInvalidArgument, "need at least two Gamma values");
  std::vector<double> values;
  for (double big_gamma : gammas) {
    const SnrGrid grid(cfg.gamma_min, big_gamma, cfg.n_steps);
    std::vector<double> g(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Matrix m = grid[i] * cov;
      m.diagonal().array() += 1.0;
      g[i] = m.ldlt().solve(delta).squaredNorm();
    }
    values.push_back(integrate(grid, g));
  }
  double growth = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    growth = std::min(growth, (values[k + 1] / values[k]) / (gammas[k + 1] / gammas[k]));
  }
  json config{{"integration", io::to_json(cfg)}, {"gammas", gammas}};
  return make_report("mahalanobis_divergence", growth, 0.5, std::nullopt, std::move(config),
                     json{{"values", values}});
}

/// One path on cfg's grid: relative gap between the two sides of the
/// pointwise I-MMSE relation.
inline CheckReport check_pointwise_immse(const Prior& prior, const Vector& x,
                                         const IntegrationConfig& cfg, std::uint64_t seed,
                                         double tolerance = 0.05) {
  iem::detail::check_point(prior, x, "x");
  const BrownianPath path = sample_path(cfg.grid(), prior.dim(), seed);
  const auto sides = detail::immse_sides(prior, x, path);
  json config{{"integration", io::to_json(cfg)}, {"path_seed", seed}, {"x", detail::vector_json(x)}};
  return make_report("pointwise_immse", sides.relative_error(), std::nullopt, tolerance,
                     std::move(config), json{{"lhs", sides.lhs}, {"rhs", sides.rhs}});
}

/// Ratio of the mean squared I-MMSE residual on cfg's grid to that on the
/// grid with every interval halved, over n_paths nested paths. The scheme
/// has strong order 1/2, so the squared error halves with the step and the
/// ratio should be close to 2.
inline CheckReport check_immse_convergence(const Prior& prior, const Vector& x,
                                           const IntegrationConfig& cfg, std::size_t n_paths,
                                           double lower = 1.5, double upper = 3.0) {
  iem::detail::check_point(prior, x, "x");
  detail::require(n_paths >= 1, ErrorCode::kInvalidArgument, "need at least one path");
  cfg.validate();
  const SnrGrid fine(cfg.gamma_min, cfg.gamma_max, 2 * (cfg.n_steps - 1) + 1);
  std::vector<double> coarse_sq(n_paths), fine_sq(n_paths);
  iem::detail::parallel_for(n_paths, [&](std::size_t p) {
    const BrownianPath path = sample_path(fine, prior.dim(), cfg.seed, p);
    const auto f = detail::immse_sides(prior, x, path);
    const auto c = detail::immse_sides(prior, x, subsample(path, 2));
    fine_sq[p] = (f.lhs - f.rhs) * (f.lhs - f.rhs);
    coarse_sq[p] = (c.lhs - c.rhs) * (c.lhs - c.rhs);
  });
  double sc = 0.0, sf = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    sc += coarse_sq[p];
    sf += fine_sq[p];
  }
  const double ratio = sc / sf;
  json config{{"integration", io::to_json(cfg)},
              {"fine_steps", fine.size()},
              {"paths", n_paths},
              {"x", detail::vector_json(x)}};
  json details{{"coarse_mse", sc / static_cast<double>(n_paths)},
               {"fine_mse", sf / static_cast<double>(n_paths)}};
  return make_report("immse_convergence", ratio, lower, upper, std::move(config), std::move(details));
}

/// z at the last node against its Ito expansion
///   z_0 + sum_i (s1_i - s2_i) . dw_i
///       - 1/2 sum_i (|s1_i + w_i/g_i|^2 - |s2_i + w_i/g_i|^2) dg_i,
/// where sk_i is the blurred score at g_i xk + w_i.
inline CheckReport check_z_consistency(const Prior& prior, const Vector& x1, const Vector& x2,
                                       const IntegrationConfig& cfg, std::uint64_t seed,
                                       double tolerance = 0.05) {
  const BrownianPath path = sample_path(cfg.grid(), prior.dim(), seed);
  const auto z = z_process(prior, prior, x1, x2, path);
  const auto nodes = path.grid.nodes();
  double acc = z.front();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double g = nodes[i];
    const Vector w = path.at(i);
    const Vector s1 = blurred_score(prior, g * x1 + w, g);
    const Vector s2 = blurred_score(prior, g * x2 + w, g);
    const Vector shift = w / g;
    acc += (s1 - s2).dot(path.at(i + 1) - w) -
           0.5 * ((s1 + shift).squaredNorm() - (s2 + shift).squaredNorm()) * (nodes[i + 1] - g);
  }
  const double lhs = z.back();
  const double measured = std::abs(lhs - acc) / (1.0 + std::abs(lhs));
  json config{{"integration", io::to_json(cfg)},
              {"path_seed", seed},
              {"x1", detail::vector_json(x1)},
              {"x2", detail::vector_json(x2)}};
  return make_report("z_consistency", measured, std::nullopt, tolerance, std::move(config),
                     json{{"z_final", lhs}, {"ito_sum", acc}});
}

/// 1/2 mean over x ~ prior of the mismatched IEM^2 between prior and its
/// translate p(. + s) at (x, x), against KL(p || p(. + s)). Sample j uses
/// path seed mix(cfg.seed, j).
inline CheckReport check_kl_decomposition(const Prior& prior, const Vector& s, std::size_t n_samples,
                                          const IntegrationConfig& cfg, std::uint64_t seed,
                                          double tolerance = 0.05) {
  detail::require(n_samples >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  const auto d = prior.dim();
  const Prior shifted = apply_isometry(prior, Matrix::Identity(d, d), -s);
  const Matrix xs = sample(prior, n_samples, seed);
  std::vector<double> values(n_samples);
  iem::detail::parallel_for(n_samples, [&](std::size_t j) {
    IntegrationConfig local = cfg;
    local.seed = iem::detail::mix_seed(cfg.seed, j);
    const Vector x = xs.row(static_cast<Eigen::Index>(j)).transpose();
    values[j] = mismatched_iem(prior, shifted, x, x, local).squared_value;
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  const double lhs = 0.5 * sum / static_cast<double>(n_samples);
  const double kl = kl_shift(prior, s);
  const double measured = kl > 0.0 ? std::abs(lhs - kl) / kl : std::abs(lhs - kl);
  json config{{"integration", io::to_json(cfg)},
              {"samples", n_samples},
              {"sample_seed", seed},
              {"shift", detail::vector_json(s)}};
  return make_report("kl_decomposition", measured, std::nullopt, tolerance, std::move(config),
                     json{{"half_mean_iem_squared", lhs}, {"kl", kl}});
}

/// |IEM^2(x, x + eps v) - eps^2 v^T G v| / (eps^2 v^T G v) along each
/// eigenvector v of G(x), with G and the distance on the same path set.
inline CheckReport check_quadratic_expansion(const Prior& prior, const Vector& x,
                                             const IntegrationConfig& cfg, double eps = 1e-2,
                                             double tolerance = 0.05) {
  const LocalMetric metric = metric_hessian_form(prior, x, cfg);
  double worst = 0.0;
  json ratios = json::array();
  for (Eigen::Index k = 0; k < metric.eigenvectors.cols(); ++k) {
    const Vector e = eps * metric.eigenvectors.col(k);
    const double quad = e.dot(metric.G * e);
    const double est = iem_squared(prior, x, x + e, cfg).squared_value;
    const double rel = std::abs(est - quad) / quad;
    worst = std::max(worst, rel);
    ratios.push_back({{"direction", detail::vector_json(metric.eigenvectors.col(k))},
                      {"quadratic_form", quad},
                      {"iem_squared", est},
                      {"relative_error", rel}});
  }
  json config{{"integration", io::to_json(cfg)}, {"x", detail::vector_json(x)}, {"eps", eps}};
  return make_report("quadratic_expansion", worst, std::nullopt, tolerance, std::move(config),
                     json{{"directions", ratios}});
}

/// Applies a seeded random isometry (A, b) to the prior, both points and
/// every path (w -> A w), and compares z and IEM^2 with the originals. A is
/// Haar-orthogonal, or a signed permutation when the prior has Laplace
/// factors. Measured is the larger of the relative IEM^2 gap and the largest
/// z gap relative to max(1, |z|).
inline CheckReport check_isometry(const Prior& prior, const Vector& x1, const Vector& x2,
                                  const IntegrationConfig& cfg, std::uint64_t seed,
                                  double tolerance = 1e-12) {
  const auto d = prior.dim();
  std::mt19937_64 rng(seed);
  const Matrix a = prior.has_laplace() ? detail::random_signed_permutation(d, rng)
                                       : detail::random_orthogonal(d, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector b(d);
  for (auto& v : b) v = normal(rng);
  const Prior moved = apply_isometry(prior, a, b);
  const auto paths = make_paths(cfg, d);
  std::vector<BrownianPath> moved_paths;
  moved_paths.reserve(paths.size());
  for (const auto& p : paths) moved_paths.push_back({p.grid, p.w * a.transpose()});
  const Vector y1 = a * x1 + b;
  const Vector y2 = a * x2 + b;
  const auto before = estimate_squared(prior, prior, x1, x2, paths, paths);
  const auto after = estimate_squared(moved, moved, y1, y2, moved_paths, moved_paths);
  const double scale = std::max(std::abs(before.squared_value), std::numeric_limits<double>::min());
  double gap = std::abs(before.squared_value - after.squared_value) / scale;
  const auto z0 = z_process(prior, prior, x1, x2, paths.front());
  const auto z1 = z_process(moved, moved, y1, y2, moved_paths.front());
  double z_gap = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    z_gap = std::max(z_gap, std::abs(z0[i] - z1[i]) / std::max(1.0, std::abs(z0[i])));
  }
  json config{{"integration", io::to_json(cfg)}, {"isometry_seed", seed}};
  json details{{"iem_squared", before.squared_value},
               {"iem_squared_transformed", after.squared_value},
               {"iem_relative_gap", gap},
               {"z_relative_gap", z_gap}};
  return make_report("isometry", std::max(gap, z_gap), std::nullopt, tolerance, std::move(config),
                     std::move(details));
}

namespace detail {

using TripleEstimates = std::array<std::array<DistanceEstimate, 3>, 3>;

/// All nine ordered-pair estimates for rows 3t, 3t+1, 3t+2 of pts, each on
/// the shared path set. Entry (i, j) equals iem_squared(x_i, x_j) bit for bit.
inline TripleEstimates triple_estimates(const Prior& prior, const Matrix& pts, std::size_t t,
                                        std::span<const BrownianPath> paths) {
  const SnrGrid& grid = paths.front().grid;
  std::vector<std::array<iem::detail::PathFeatures, 3>> feats(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (int k = 0; k < 3; ++k) {
      const Vector x = pts.row(static_cast<Eigen::Index>(3 * t + k)).transpose();
      feats[p][k] = iem::detail::path_features(prior, x, paths[p]);
    }
  }
  TripleEstimates e;
  std::vector<double> per_path(paths.size());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (std::size_t p = 0; p < paths.size(); ++p) {
        per_path[p] = iem::detail::pair_integral(grid, feats[p][i], feats[p][j], nullptr, {});
      }
      e[i][j] = iem::detail::summarize(per_path, {});
    }
  }
  return e;
}

}  // namespace detail

/// Symmetry, nonnegativity and zero self-distance (all exact) and the
/// triangle inequality with 3 combined standard errors of slack, over
/// n_triples triples drawn from the prior. Measured is the number of
/// violations.
inline CheckReport metric_axiom_suite(const Prior& prior, std::size_t n_triples,
                                      const IntegrationConfig& cfg, std::uint64_t seed) {
  detail::require(n_triples >= 1, ErrorCode::kInvalidArgument, "need at least one triple");
  const Matrix pts = sample(prior, 3 * n_triples, seed);
  const auto paths = make_paths(cfg, prior.dim());
  struct Counts {
    int symmetry = 0, nonnegativity = 0, identity = 0, triangle = 0;
    double worst_triangle_slack = std::numeric_limits<double>::infinity();
  };
  std::vector<Counts> counts(n_triples);
  iem::detail::parallel_for(n_triples, [&](std::size_t t) {
    const auto e = detail::triple_estimates(prior, pts, t, paths);
    Counts& c = counts[t];
    for (int i = 0; i < 3; ++i) {
      if (e[i][i].squared_value != 0.0) ++c.identity;
      for (int j = 0; j < 3; ++j) {
        if (e[i][j].squared_value < 0.0 || e[i][j].value < 0.0) ++c.nonnegativity;
        if (e[i][j].squared_value != e[j][i].squared_value) ++c.symmetry;
      }
    }
    // The standard error of a distance follows from that of its square.
    const auto value_se = [](const DistanceEstimate& d) {
      return d.value > 0.0 ? d.std_error / (2.0 * d.value) : 0.0;
    };
    const std::array<std::array<int, 3>, 3> orders{{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
    for (const auto& o : orders) {
      const auto& ac = e[o[0]][o[2]];
      const auto& ab = e[o[0]][o[1]];
      const auto& bc = e[o[1]][o[2]];
      const double se = std::sqrt(value_se(ac) * value_se(ac) + value_se(ab) * value_se(ab) +
                                  value_se(bc) * value_se(bc));
      const double slack = ab.value + bc.value + 3.0 * se - ac.value;
      c.worst_triangle_slack = std::min(c.worst_triangle_slack, slack);
      if (slack < 0.0) ++c.triangle;
    }
  });
  Counts total;
  for (const auto& c : counts) {
    total.symmetry += c.symmetry;
    total.nonnegativity += c.nonnegativity;
    total.identity += c.identity;
    total.triangle += c.triangle;
    total.worst_triangle_slack = std::min(total.worst_triangle_slack, c.worst_triangle_slack);
  }
  const int violations = total.symmetry + total.nonnegativity + total.identity + total.triangle;
  json config{{"integration", io::to_json(cfg)}, {"triples", n_triples}, {"sample_seed", seed}};
  json details{{"symmetry_violations", total.symmetry},
               {"nonnegativity_violations", total.nonnegativity},
               {"identity_violations", total.identity},
               {"triangle_violations", total.triangle},
               {"smallest_triangle_slack", total.worst_triangle_slack}};
  return make_report("metric_axioms", violations, std::nullopt, 0.0, std::move(config),
                     std::move(details));
}

/// Smallest IEM^2 / stderr over the distinct pairs of the same triples with
/// |x1 - x2| >= min_separation; passes above 5. Needs n_paths >= 2.
inline CheckReport check_separation(const Prior& prior, std::size_t n_triples,
                                    const IntegrationConfig& cfg, std::uint64_t seed,
                                    double min_separation = 0.1) {
  detail::require(n_triples >= 1, ErrorCode::kInvalidArgument, "need at least one triple");
  detail::require(cfg.n_paths >= 2, ErrorCode::kInvalidArgument,
                  "separation needs a standard error, so at least two paths");
  const Matrix pts = sample(prior, 3 * n_triples, seed);
  const auto paths = make_paths(cfg, prior.dim());
  std::vector<double> worst(n_triples, std::numeric_limits<double>::infinity());
  std::vector<int> tested(n_triples, 0);
  iem::detail::parallel_for(n_triples, [&](std::size_t t) {
    const auto e = detail::triple_estimates(prior, pts, t, paths);
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const auto ri = static_cast<Eigen::Index>(3 * t + i);
        const auto rj = static_cast<Eigen::Index>(3 * t + j);
        if ((pts.row(ri) - pts.row(rj)).norm() < min_separation) continue;
        ++tested[t];
        const auto& d = e[i][j];
        const double ratio = d.std_error > 0.0 ? d.squared_value / d.std_error
                                               : (d.squared_value > 0.0 ? 1e300 : 0.0);
        worst[t] = std::min(worst[t], ratio);
      }
    }
  });
  double smallest = std::numeric_limits<double>::infinity();
  int pairs = 0;
  for (std::size_t t = 0; t < n_triples; ++t) {
    smallest = std::min(smallest, worst[t]);
    pairs += tested[t];
  }
  json config{{"integration", io::to_json(cfg)},
              {"triples", n_triples},
              {"sample_seed", seed},
              {"min_separation", min_separation}};
  return make_report("metric_separation", smallest, 5.0, std::nullopt, std::move(config),
                     json{{"pairs_tested", pairs}});
}

/// Hessian and covariance forms agree to 1e-9 and both match the Gaussian
/// closed form Sigma^{-1} (I - (G Sigma + I)^{-1}) to 3%.
inline std::vector<CheckReport> check_local_metric_gaussian(const Vector& mean, const Matrix& cov,
                                                            const Vector& x,
                                                            const IntegrationConfig& cfg) {
  const Prior prior = Prior::gaussian(mean, cov);
  const auto d = prior.dim();
  const LocalMetric h = metric_hessian_form(prior, x, cfg);
  const LocalMetric c = metric_cov_form(prior, x, cfg);
  Matrix m = cfg.gamma_max * cov;
  m.diagonal().array() += 1.0;
  const Matrix closed =
      cov.ldlt().solve(Matrix::Identity(d, d) - m.ldlt().solve(Matrix::Identity(d, d)));
  json config{{"integration", io::to_json(cfg)}, {"x", detail::vector_json(x)}};
  const double forms = (h.G - c.G).norm() / h.G.norm();
  const double err = std::max((h.G - closed).norm(), (c.G - closed).norm()) / closed.norm();
  return {make_report("metric_forms_agree", forms, std::nullopt, 1e-9, config),
          make_report("metric_gaussian_closed_form", err, std::nullopt, 0.03, config,
                      json{{"closed_form", io::to_json(closed)}, {"hessian_form", io::to_json(h.G)}})};
}

/// Largest pairwise relative Frobenius gap between the three sample averages.
inline CheckReport check_average_metric(const Prior& prior, std::size_t n_samples,
                                        const IntegrationConfig& cfg, std::uint64_t seed,
                                        double tolerance = 0.05) {
  const AverageMetricTriplet t = average_metric_triplet(prior, n_samples, cfg, seed);
  double worst = detail::relative_frobenius(t.metric, t.score_outer);
  json details{{"metric", io::to_json(t.metric)}, {"score_outer", io::to_json(t.score_outer)}};
  if (t.neg_hessian) {
    worst = std::max({worst, detail::relative_frobenius(t.metric, *t.neg_hessian),
                      detail::relative_frobenius(*t.neg_hessian, t.score_outer)});
    details["neg_hessian"] = io::to_json(*t.neg_hessian);
  }
  json config{{"integration", io::to_json(cfg)}, {"samples", n_samples}, {"sample_seed", seed}};
  return make_report("average_metric", worst, std::nullopt, tolerance, std::move(config),
                     std::move(details));
}

/// Central differences with step 1e-4 (1 + |y_i|) at n_points channel
/// outputs y = g x + w per gamma. Score error is |s - FD|/(1 + |s|) against
/// 1e-5, Hessian error |H - FD|_F/(1 + |H|_F) against 1e-4.
inline std::vector<CheckReport> check_finite_differences(const Prior& prior,
                                                         const std::vector<double>& gammas,
                                                         std::size_t n_points, std::uint64_t seed) {
  const auto d = prior.dim();
  const Matrix xs = sample(prior, n_points * gammas.size(), seed);
  std::mt19937_64 rng(iem::detail::mix_seed(seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);
  double score_err = 0.0, hess_err = 0.0;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double g = gammas[gi];
    for (std::size_t k = 0; k < n_points; ++k) {
      Vector y = g * xs.row(static_cast<Eigen::Index>(gi * n_points + k)).transpose();
      for (auto& v : y) v += std::sqrt(g) * normal(rng);
      const BlurredEval e = blurred_eval(prior, y, g, Derivatives::kHessian);
      Vector fd_score(d);
      Matrix fd_hess(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        const double h = 1e-4 * (1.0 + std::abs(y[i]));
        Vector up = y, down = y;
        up[i] += h;
        down[i] -= h;
        fd_score[i] =
            (blurred_log_density(prior, up, g) - blurred_log_density(prior, down, g)) / (2.0 * h);
        fd_hess.col(i) = (blurred_score(prior, up, g) - blurred_score(prior, down, g)) / (2.0 * h);
      }
      score_err = std::max(score_err, (e.score - fd_score).norm() / (1.0 + e.score.norm()));
      hess_err = std::max(hess_err, (e.hessian - fd_hess).norm() / (1.0 + e.hessian.norm()));
    }
  }
  json config{{"gammas", gammas}, {"points_per_gamma", n_points}, {"sample_seed", seed}};
  return {make_report("finite_difference_score", score_err, std::nullopt, 1e-5, config),
          make_report("finite_difference_hessian", hess_err, std::nullopt, 1e-4, config)};
}

/// K-medoids on n draws from a mixture under the IEM and the Euclidean
/// distance, scored against the sampled component labels.
struct ClusteringComparison {
  LabeledSample sample;
  ClusteringResult iem_result;
  ClusteringResult euclidean_result;
  double iem_accuracy = 0.0;
  double euclidean_accuracy = 0.0;
};

inline Matrix euclidean_distance_matrix(const Matrix& points) {
  const auto n = points.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      out(i, j) = out(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return out;
}

inline ClusteringComparison compare_clustering(const Prior& prior, std::size_t n, std::size_t k,
                                               const IntegrationConfig& cfg, std::uint64_t seed) {
  ClusteringComparison out;
  out.sample = sample_labeled(prior, n, seed);
  const Matrix d_iem = distance_matrix(prior, out.sample.points, cfg);
  const Matrix d_euc = euclidean_distance_matrix(out.sample.points);
  out.iem_result = kmedoids(d_iem, k, seed);
  out.euclidean_result = kmedoids(d_euc, k, seed);
  out.iem_accuracy = accuracy(out.iem_result.assignments, out.sample.labels, k);
  out.euclidean_accuracy = accuracy(out.euclidean_result.assignments, out.sample.labels, k);
  return out;
}

/// IEM accuracy at least min_accuracy, and strictly above Euclidean.
inline std::vector<CheckReport> check_clustering(const Prior& prior, std::size_t n, std::size_t k,
                                                 const IntegrationConfig& cfg, std::uint64_t seed,
                                                 double min_accuracy = 0.9) {
  const ClusteringComparison c = compare_clustering(prior, n, k, cfg, seed);
  json config{{"integration", io::to_json(cfg)}, {"samples", n}, {"k", k}, {"seed", seed}};
  json details{{"iem_accuracy", c.iem_accuracy},
               {"euclidean_accuracy", c.euclidean_accuracy},
               {"iem_medoids", c.iem_result.medoid_indices},
               {"euclidean_medoids", c.euclidean_result.medoid_indices}};
  // Accuracies are multiples of 1/n, so half of that separates them.
  return {make_report("clustering_accuracy", c.iem_accuracy, min_accuracy, std::nullopt, config,
                      details),
          make_report("clustering_beats_euclidean", c.iem_accuracy - c.euclidean_accuracy,
                      0.5 / static_cast<double>(n), std::nullopt, config, details)};
}

/// A named group of checks with pinned configurations.
struct Suite {
  std::string name;
  std::string summary;
  std::function<std::vector<CheckReport>()> run;
};

namespace detail {

inline CheckReport labeled(CheckReport r, const std::string& label) {
  r.name += "/" + label;
  return r;
}

inline void append(std::vector<CheckReport>& out, std::vector<CheckReport> more,
                   const std::string& label) {
  for (auto& r : more) out.push_back(labeled(std::move(r), label));
}

inline IntegrationConfig config(double gamma_min, double gamma_max, std::size_t steps,
                                std::size_t paths, std::uint64_t seed = 0) {
  IntegrationConfig cfg;
  cfg.gamma_min = gamma_min;
  cfg.gamma_max = gamma_max;
  cfg.n_steps = steps;
  cfg.n_paths = paths;
  cfg.seed = seed;
  return cfg;
}

inline constexpr double kWideMin = 1.0 / 1024.0;
inline constexpr double kWideMax = 1024.0;

/// Random SPD matrix Q diag(l) Q^T with l uniform in [0.2, 2].
inline Matrix random_spd(Eigen::Index d, std::mt19937_64& rng) {
  const Matrix q = random_orthogonal(d, rng);
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  Vector l(d);
  for (auto& v : l) v = unif(rng);
  Matrix cov = q * l.asDiagonal() * q.transpose();
  return 0.5 * (cov + cov.transpose());
}

inline std::vector<std::pair<Vector, Vector>> sampled_pairs(const Prior& prior, std::size_t n,
                                                            std::uint64_t seed) {
  const Matrix pts = sample(prior, 2 * n, seed);
  std::vector<std::pair<Vector, Vector>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    pairs.emplace_back(pts.row(static_cast<Eigen::Index>(2 * i)).transpose(),
                       pts.row(static_cast<Eigen::Index>(2 * i + 1)).transpose());
  }
  return pairs;
}

inline Prior scalar_gaussian() { return Prior::gaussian(Vector{{0.5}}, Matrix{{2.0}}); }

inline Prior scalar_mixture() {
  return Prior::mixture({0.4, 0.6}, {Prior::gaussian(Vector{{-2.0}}, Matrix{{0.5}}),
                                     Prior::gaussian(Vector{{1.5}}, Matrix{{1.0}})});
}

/// The three two-dimensional illustration priors with their distance ranges.
inline std::vector<std::pair<std::string, std::pair<Prior, IntegrationConfig>>> illustration_priors(
    std::size_t paths) {
  return {{"laplace", {presets::laplace_product(), config(1.0 / 16.0, 16.0, 200, paths)}},
          {"gaussian", {presets::anisotropic_gaussian(), config(kWideMin, kWideMax, 200, paths)}},
          {"mixture", {presets::skewed_mixture(), config(kWideMin, kWideMax, 200, paths)}}};
}

inline std::vector<CheckReport> mahalanobis_suite() {
  std::vector<CheckReport> out;
  const auto cfg = config(kWideMin, kWideMax, 200, 50);
  const Prior aniso = presets::anisotropic_gaussian();
  out.push_back(labeled(check_mahalanobis(Vector{{0.0, 1.0}}, Matrix{{1.0, 0.0}, {0.0, 0.1}},
                                          sampled_pairs(aniso, 20, 1), cfg),
                        "diagonal"));
  std::mt19937_64 rng(7);
  const Matrix cov = random_spd(2, rng);
  const Prior spd = Prior::gaussian(Vector::Zero(2), cov);
  out.push_back(labeled(check_mahalanobis(Vector::Zero(2), cov, sampled_pairs(spd, 20, 2), cfg),
                        "random_spd"));
  out.push_back(labeled(check_mahalanobis(Vector{{0.0}}, Matrix{{1.0}}, {{Vector{{0.0}}, Vector{{1.0}}}},
                                          cfg),
                        "scalar"));
  out.push_back(labeled(check_mahalanobis_divergence(Matrix{{1.0, 0.0}, {0.0, 0.0}}, Vector{{0.0, 1.0}},
                                                     config(kWideMin, kWideMax, 200, 1)),
                        "singular"));
  return out;
}

inline std::vector<CheckReport> local_metric_suite() {
  std::vector<CheckReport> out;
  const auto cfg = config(kWideMin, kWideMax, 200, 50);
  const Vector mean{{0.0, 1.0}};
  const Matrix cov{{1.0, 0.0}, {0.0, 0.1}};
  append(out, check_local_metric_gaussian(mean, cov, Vector{{0.3, 0.2}}, cfg), "anisotropic");
  std::mt19937_64 rng(11);
  const Matrix spd = random_spd(2, rng);
  append(out, check_local_metric_gaussian(Vector::Zero(2), spd, Vector{{-0.5, 0.4}}, cfg),
         "random_spd");
  return out;
}

inline std::vector<CheckReport> quadratic_expansion_suite() {
  std::vector<CheckReport> out;
  const Prior gmm = presets::skewed_mixture();
  const auto cfg = config(1.0 / 16.0, 16.0, 200, 200);
  const std::vector<Vector> anchors{Vector{{0.0, 1.0}}, Vector{{1.0, -1.0}}, Vector{{0.5, 0.0}},
                                    Vector{{-1.0, 0.5}}, Vector{{2.0, -0.5}}};
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    out.push_back(labeled(check_quadratic_expansion(gmm, anchors[i], cfg), "anchor" + std::to_string(i)));
  }
  return out;
}

inline std::vector<CheckReport> average_metric_suite() {
  return {labeled(check_average_metric(presets::correlated_modes(), 10000,
                                       config(kWideMin, kWideMax, 200, 1), 0),
                  "correlated_modes")};
}

inline std::vector<CheckReport> kl_suite() {
  const auto cfg = config(kWideMin, kWideMax, 200, 10);
  const Prior iso = Prior::gaussian(Vector::Zero(2), Matrix::Identity(2, 2));
  return {labeled(check_kl_decomposition(iso, Vector{{1.0, 0.0}}, 1000, cfg, 0), "gaussian"),
          labeled(check_kl_decomposition(iso, Vector{{0.0, 0.0}}, 1000, cfg, 0), "zero_shift"),
          labeled(check_kl_decomposition(presets::correlated_modes(), Vector{{0.0, 0.5}}, 1000, cfg, 0),
                  "correlated_modes")};
}

inline std::vector<CheckReport> immse_suite() {
  std::vector<CheckReport> out;
  const auto cfg = config(kWideMin, kWideMax, 4096, 1);
  const Vector x{{0.7}};
  const std::vector<std::pair<std::string, Prior>> priors{{"gaussian", scalar_gaussian()},
                                                          {"mixture", scalar_mixture()}};
  for (const auto& [label, prior] : priors) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      out.push_back(labeled(check_pointwise_immse(prior, x, cfg, seed),
                            label + "/seed" + std::to_string(seed)));
    }
    out.push_back(labeled(check_immse_convergence(prior, x, cfg, 200), label));
    out.push_back(labeled(check_z_consistency(prior, x, Vector{{-0.4}}, cfg, 0), label));
  }
  return out;
}

inline std::vector<CheckReport> axiom_suite() {
  std::vector<CheckReport> out;
  for (const auto& [label, pc] : illustration_priors(50)) {
    out.push_back(labeled(metric_axiom_suite(pc.first, 100, pc.second, 1), label));
  }
  for (const auto& [label, pc] : illustration_priors(200)) {
    out.push_back(labeled(check_separation(pc.first, 100, pc.second, 1), label));
  }
  return out;
}

inline std::vector<CheckReport> isometry_suite() {
  std::vector<CheckReport> out;
  for (const auto& [label, pc] : illustration_priors(10)) {
    const auto pairs = sampled_pairs(pc.first, 20, 3);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      out.push_back(labeled(check_isometry(pc.first, pairs[k].first, pairs[k].second, pc.second, k),
                            label + "/" + std::to_string(k)));
    }
  }
  return out;
}

inline std::vector<CheckReport> clustering_suite() {
  std::vector<CheckReport> out;
  append(out, check_clustering(presets::correlated_modes(), 500, 2, config(kWideMin, kWideMax, 200, 50), 0),
         "correlated_modes");
  return out;
}

inline std::vector<CheckReport> finite_difference_suite() {
  std::vector<double> gammas;
  for (int e = -8; e <= 8; ++e) gammas.push_back(std::ldexp(1.0, e));
  std::vector<CheckReport> out;
  const std::vector<std::pair<std::string, Prior>> priors{
      {"laplace", presets::laplace_product()},
      {"gaussian", presets::anisotropic_gaussian()},
      {"mixture", presets::skewed_mixture()},
      {"correlated_modes", presets::correlated_modes()},
      {"laplace_gaussian_mixture",
       Prior::mixture({0.5, 0.5}, {Prior::product_laplace(Vector{{-2.0, 0.0}}, Vector{{1.0, 0.5}}),
                                   Prior::gaussian(Vector{{2.0, 0.5}}, Matrix{{0.5, 0.1}, {0.1, 0.3}})})}};
  for (const auto& [label, prior] : priors) {
    append(out, check_finite_differences(prior, gammas, 100, 0), label);
  }
  return out;
}

}  // namespace detail

inline const std::vector<Suite>& suites() {
  static const std::vector<Suite> all{
      {"mahalanobis", "Gaussian priors reduce to the Mahalanobis distance", detail::mahalanobis_suite},
      {"local_metric", "both local-metric forms against the Gaussian closed form",
       detail::local_metric_suite},
      {"quadratic_expansion", "IEM^2(x, x + eps) against eps^T G eps", detail::quadratic_expansion_suite},
      {"average_metric", "sample averages of G, -Hessian and score outer product",
       detail::average_metric_suite},
      {"kl", "average mismatched IEM^2 against the KL divergence of a shift", detail::kl_suite},
      {"immse", "pointwise I-MMSE relation, its convergence and the z expansion", detail::immse_suite},
      {"axioms", "metric axioms and separation on sampled triples", detail::axiom_suite},
      {"isometry", "invariance under random Euclidean isometries", detail::isometry_suite},
      {"clustering", "K-medoids mode recovery, IEM against Euclidean", detail::clustering_suite},
      {"finite_difference", "analytic scores and Hessians against central differences",
       detail::finite_difference_suite},
  };
  return all;
}

/// Runs one suite by name, or every suite for "all".
inline std::vector<CheckReport> run_suite(const std::string& name) {
  std::vector<CheckReport> out;
  bool found = false;
  for (const auto& s : suites()) {
    if (name != "all" && name != s.name) continue;
    found = true;
    for (auto& r : s.run()) out.push_back(std::move(r));
  }
  detail::require(found, ErrorCode::kInvalidArgument, [&] { return "unknown suite '" + name + "'"; });
  return out;
}

}  // namespace iem::validate

#endif  // IEM_VALIDATE_HPP_
