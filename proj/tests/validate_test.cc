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

#include "iem/validate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "iem/presets.hpp"

namespace iem::validate {
namespace {

IntegrationConfig make_cfg(double gmin, double gmax, std::size_t steps, std::size_t paths,
                           std::uint64_t seed = 0) {
  IntegrationConfig cfg;
  cfg.gamma_min = gmin;
  cfg.gamma_max = gmax;
  cfg.n_steps = steps;
  cfg.n_paths = paths;
  cfg.seed = seed;
  return cfg;
}

// The Ito expansion of z with the drift sign flipped.
double z_expansion_with_minus(const Prior& p, const Vector& x1, const Vector& x2, const BrownianPath& path) {
  const auto z = z_process(p, p, x1, x2, path);
  const auto nodes = path.grid.nodes();
  double acc = z.front();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double g = nodes[i];
    const Vector w = path.at(i);
    const Vector s1 = blurred_score(p, g * x1 + w, g);
    const Vector s2 = blurred_score(p, g * x2 + w, g);
    acc += (s1 - s2).dot(path.at(i + 1) - w) -
           0.5 * ((s1 - w / g).squaredNorm() - (s2 - w / g).squaredNorm()) * (nodes[i + 1] - g);
  }
  return std::abs(z.back() - acc) / (1.0 + std::abs(z.back()));
}

TEST(Report, BoundSemantics) {
  EXPECT_TRUE(make_report("a", 0.02, std::nullopt, 0.03, {}).passed);
  EXPECT_TRUE(make_report("a", 0.03, std::nullopt, 0.03, {}).passed);
  EXPECT_FALSE(make_report("a", 0.031, std::nullopt, 0.03, {}).passed);
  EXPECT_TRUE(make_report("a", 2.0, 1.5, 3.0, {}).passed);
  EXPECT_FALSE(make_report("a", 1.4, 1.5, 3.0, {}).passed);
  EXPECT_FALSE(make_report("a", 3.1, 1.5, 3.0, {}).passed);
  EXPECT_TRUE(make_report("a", 1e9, 5.0, std::nullopt, {}).passed);
  EXPECT_FALSE(make_report("a", NAN, std::nullopt, std::nullopt, {}).passed);
  const json j = to_json(make_report("a", 1.0, std::nullopt, 2.0, {}));
  EXPECT_TRUE(j["lower"].is_null());
  EXPECT_EQ(j["tolerance"], 2.0);
  EXPECT_TRUE(all_passed({}));
}

TEST(Kl, ZeroShiftAndGaussianQuadrature) {
  const Prior p = presets::skewed_mixture();
  EXPECT_NEAR(detail::kl_quadrature(p, Vector::Zero(2), 401), 0.0, 1e-12);
  const Matrix cov{{1.0, 0.3}, {0.3, 0.4}};
  const Prior g = Prior::gaussian(Vector{{0.2, -0.1}}, cov);
  const Vector s{{0.5, -0.25}};
  const double closed = 0.5 * s.dot(cov.inverse() * s);
  EXPECT_NEAR(kl_shift(g, s), closed, 1e-12);
  EXPECT_NEAR(detail::kl_quadrature(g, s, 801), closed, 1e-6);
  EXPECT_GT(detail::kl_quadrature(p, Vector{{0.0, 0.5}}, 401), 0.0);
}

TEST(ZExpansion, IdenticalPointsAreExactlyZero) {
  const auto r = check_z_consistency(presets::skewed_mixture(), Vector{{0.1, 0.2}}, Vector{{0.1, 0.2}},
                                     make_cfg(1.0 / 64.0, 64.0, 100, 1), 0);
  EXPECT_EQ(r.measured, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(ZExpansion, ResidualShrinksWithStepsAndNeedsPlusSign) {
  const Prior p = detail::scalar_mixture();
  const Vector x1{{0.7}}, x2{{-0.4}};
  double coarse = 0.0, fine = 0.0, minus = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    coarse += check_z_consistency(p, x1, x2, make_cfg(1.0 / 1024.0, 1024.0, 256, 1), seed).measured;
    fine += check_z_consistency(p, x1, x2, make_cfg(1.0 / 1024.0, 1024.0, 4096, 1), seed).measured;
    const BrownianPath path = sample_path(SnrGrid(1.0 / 1024.0, 1024.0, 4096), 1, seed);
    minus += z_expansion_with_minus(p, x1, x2, path);
  }
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine / 4.0, 0.05);
  EXPECT_GT(minus / 4.0, 0.05);
}

TEST(Immse, SidesAgreeOnFineGrid) {
  const Prior p = detail::scalar_gaussian();
  const auto path = sample_path(SnrGrid(1.0 / 1024.0, 1024.0, 8192), 1, 3);
  const auto sides = detail::immse_sides(p, Vector{{0.7}}, path);
  EXPECT_LT(sides.relative_error(), 0.05);
  EXPECT_EQ(sides.lhs, -blurred_log_density(p, 1024.0 * Vector{{0.7}} + path.at(8191), 1024.0));
}

TEST(Mahalanobis, DivergesOnlyAlongNullDirections) {
  const Matrix singular{{1.0, 0.0}, {0.0, 0.0}};
  const auto cfg = make_cfg(1.0 / 1024.0, 1024.0, 200, 1);
  EXPECT_TRUE(check_mahalanobis_divergence(singular, Vector{{0.0, 1.0}}, cfg).passed);
  EXPECT_FALSE(check_mahalanobis_divergence(singular, Vector{{1.0, 0.0}}, cfg).passed);
}

TEST(Mahalanobis, SinglePairReport) {
  const auto r = check_mahalanobis(Vector{{0.0}}, Matrix{{1.0}}, {{Vector{{0.0}}, Vector{{1.0}}}},
                                   make_cfg(1.0 / 1024.0, 1024.0, 200, 5));
  EXPECT_TRUE(r.passed) << r.measured;
  EXPECT_EQ(r.details["pairs"].size(), 1u);
}

TEST(Triples, EstimatesMatchPairwiseEstimator) {
  const Prior p = presets::skewed_mixture();
  const auto cfg = make_cfg(1.0 / 16.0, 16.0, 50, 4, 2);
  const Matrix pts = sample(p, 6, 1);
  const auto paths = make_paths(cfg, 2);
  const auto t = detail::triple_estimates(p, pts, 1, paths);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto want = iem_squared(p, pts.row(3 + i).transpose(), pts.row(3 + j).transpose(), cfg);
      EXPECT_EQ(t[i][j].squared_value, want.squared_value);
      EXPECT_EQ(t[i][j].std_error, want.std_error);
    }
  }
}

TEST(Axioms, SmallSuitePasses) {
  const auto r = metric_axiom_suite(presets::correlated_modes(), 10, make_cfg(1.0 / 16.0, 16.0, 60, 10), 4);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.measured, 0.0);
}

TEST(RandomIsometries, AreOrthogonal) {
  std::mt19937_64 rng(12);
  std::set<int> det_signs;
  for (int k = 0; k < 20; ++k) {
    const Matrix q = detail::random_orthogonal(3, rng);
    EXPECT_LT((q.transpose() * q - Matrix::Identity(3, 3)).norm(), 1e-13);
    det_signs.insert(q.determinant() > 0.0 ? 1 : -1);
    const Matrix s = detail::random_signed_permutation(3, rng);
    EXPECT_EQ(s.transpose() * s, Matrix::Identity(3, 3));
    EXPECT_EQ(s.cwiseAbs().sum(), 3.0);
  }
  EXPECT_EQ(det_signs.size(), 2u);
}

TEST(Isometry, CheckPassesForEachFamily) {
  const auto cfg = make_cfg(1.0 / 16.0, 16.0, 60, 3);
  for (const Prior& p : {presets::laplace_product(), presets::anisotropic_gaussian(), presets::skewed_mixture()}) {
    const auto r = check_isometry(p, Vector{{0.3, -1.0}}, Vector{{2.0, 0.5}}, cfg, 5);
    EXPECT_TRUE(r.passed) << r.measured;
  }
}

TEST(LocalMetricCheck, GaussianReportsPass) {
  const auto reports = check_local_metric_gaussian(Vector{{0.0, 1.0}}, Matrix{{1.0, 0.0}, {0.0, 0.1}},
                                                   Vector{{0.3, 0.2}}, make_cfg(1.0 / 1024.0, 1024.0, 200, 4));
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_TRUE(all_passed(reports));
}

TEST(FiniteDifferences, GaussianMixturePasses) {
  const auto reports = check_finite_differences(presets::correlated_modes(), {1.0 / 256.0, 1.0, 256.0}, 20, 1);
  EXPECT_TRUE(all_passed(reports));
}

TEST(Suites, RegistryNamesAndUnknownSuite) {
  std::set<std::string> names;
  for (const auto& s : suites()) names.insert(s.name);
  for (const char* n : {"mahalanobis", "local_metric", "quadratic_expansion", "average_metric", "kl", "immse",
                        "axioms", "isometry", "clustering", "finite_difference"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
  try {
    run_suite("nope");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Suites, IsometrySuiteRunsAndPasses) {
  const auto reports = run_suite("isometry");
  EXPECT_EQ(reports.size(), 60u);
  EXPECT_TRUE(all_passed(reports));
  EXPECT_EQ(reports.front().name.rfind("isometry/", 0), 0u);
}

}  // namespace
}  // namespace iem::validate
