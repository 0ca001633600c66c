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

#include "iem/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "iem/presets.hpp"

namespace iem::io {
namespace {

// Parses text and returns the error (code, message), or fails.
std::pair<ErrorCode, std::string> parse_error(const std::string& text) {
  try {
    parse_prior(text);
  } catch (const Error& e) {
    return {e.code(), e.message()};
  }
  ADD_FAILURE() << "parsed: " << text;
  return {ErrorCode::kParse, ""};
}

void expect_same_density(const Prior& a, const Prior& b) {
  for (const Vector& y : {Vector{{0.1, 0.2}}, Vector{{-2.0, 3.0}}, Vector{{5.0, -1.0}}}) {
    for (double gamma : {0.01, 1.0, 100.0}) {
      EXPECT_EQ(blurred_log_density(a, y, gamma), blurred_log_density(b, y, gamma));
    }
  }
}

TEST(PriorJson, RoundTripsEveryPreset) {
  for (const Prior& p : {presets::laplace_product(), presets::anisotropic_gaussian(), presets::skewed_mixture(),
                         presets::correlated_modes()}) {
    const Prior back = parse_prior(to_json(p).dump());
    EXPECT_EQ(back.kind(), p.kind());
    expect_same_density(p, back);
  }
}

TEST(PriorJson, ParsesDocumentedLayout) {
  const Prior p = parse_prior(R"({"type": "product_laplace", "mu": [0, 1], "b": [4, 2]})");
  EXPECT_NEAR(log_density(p, Vector{{0.0, 1.0}}), std::log(1.0 / 32.0), 1e-14);
  const Prior m = parse_prior(R"({"type": "mixture", "weights": [0.5, 0.5], "components": [
      {"type": "gaussian", "mean": [0], "cov": [[1]]},
      {"type": "product_laplace", "mu": [1], "b": [2]}]})");
  EXPECT_EQ(m.kind(), PriorKind::kMixture);
  EXPECT_TRUE(m.has_laplace());
}

TEST(PriorJson, ErrorsNameTheField) {
  auto [c1, m1] = parse_error(R"({"type": "gaussian", "mean": [0, 0]})");
  EXPECT_EQ(c1, ErrorCode::kParse);
  EXPECT_EQ(m1, "cov: missing");
  auto [c2, m2] = parse_error(R"({"type": "gaussian", "mean": [0, 0], "cov": [[1, "a"], [0, 1]]})");
  EXPECT_EQ(c2, ErrorCode::kParse);
  EXPECT_EQ(m2, "cov[0][1]: expected a number");
  auto [c3, m3] = parse_error(R"({"type": "mixture", "weights": [0.5, 0.5], "components": [
      {"type": "gaussian", "mean": [0], "cov": [[1]]},
      {"type": "product_laplace", "mu": [1], "b": [-2]}]})");
  EXPECT_EQ(c3, ErrorCode::kInvalidPrior);
  EXPECT_EQ(m3, "components[1].b: entries must be > 0");
  auto [c4, m4] = parse_error(R"({"type": "cauchy"})");
  EXPECT_EQ(c4, ErrorCode::kParse);
  EXPECT_NE(m4.find("type"), std::string::npos);
  auto [c5, m5] = parse_error(R"({"type": "mixture", "weights": [1], "components": [{"type": "mixture"}]})");
  EXPECT_EQ(c5, ErrorCode::kParse);
  EXPECT_EQ(m5, "components[0].type: mixtures cannot be nested");
  auto [c6, m6] = parse_error("{not json");
  EXPECT_EQ(c6, ErrorCode::kParse);
  auto [c7, m7] = parse_error(R"({"type": "gaussian", "mean": [0, 0], "cov": [[1, 2], [2, 1]]})");
  EXPECT_EQ(c7, ErrorCode::kInvalidPrior);
  EXPECT_EQ(m7, "cov: matrix is not positive-definite");
}

TEST(PriorJson, MissingFileIsParseError) {
  try {
    load_prior("/nonexistent/prior.json");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.message(), "/nonexistent/prior.json: cannot open file");
  }
}

TEST(MatrixCsv, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  Matrix m(7, 4);
  for (auto& v : m.reshaped()) v = n01(rng) * std::pow(10.0, n01(rng) * 10.0);
  m(0, 0) = 0.1;
  m(1, 1) = -0.0;
  std::stringstream ss;
  write_matrix_csv(ss, m);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,0,1,2,3");
  EXPECT_EQ(read_matrix_csv(ss), m);
}

TEST(MatrixCsv, AcceptsHeaderlessInput) {
  std::istringstream plain("0,1.5\n1.5,0\n");
  EXPECT_EQ(read_matrix_csv(plain), (Matrix{{0.0, 1.5}, {1.5, 0.0}}));
  std::istringstream header_only_row("a,b\n0,2\n2,0\n");
  EXPECT_EQ(read_matrix_csv(header_only_row), (Matrix{{0.0, 2.0}, {2.0, 0.0}}));
  std::istringstream blank_corner(",0,1\n0,0,3\n1,3,0\n");
  EXPECT_EQ(read_matrix_csv(blank_corner), (Matrix{{0.0, 3.0}, {3.0, 0.0}}));
  std::istringstream ragged("0,1\n1\n");
  EXPECT_THROW(read_matrix_csv(ragged), Error);
  std::istringstream junk("0,1\n1,x\n");
  EXPECT_THROW(read_matrix_csv(junk), Error);
  std::istringstream empty("");
  EXPECT_THROW(read_matrix_csv(empty), Error);
}

TEST(Json, EstimateAndConfigKeys) {
  DistanceEstimate e;
  e.value = 2.0;
  e.squared_value = 4.0;
  e.std_error = 0.5;
  e.integrand_trace = {1.0, 2.0};
  const json j = to_json(e);
  EXPECT_EQ(j["stderr"], 0.5);
  EXPECT_EQ(j["value"], 2.0);
  EXPECT_EQ(j["integrand_trace"].size(), 2u);
  IntegrationConfig cfg;
  cfg.coupling = Coupling::kIndependent;
  const json c = to_json(cfg);
  EXPECT_EQ(c["coupling"], "independent");
  EXPECT_EQ(c["steps"], 512);
  EXPECT_EQ(c["gamma_min"], 1.0 / 1024.0);
}

TEST(Csv, EllipseHeader) {
  Ellipse e{Vector{{1.0, 2.0}}, Matrix::Identity(2, 2), Vector{{0.5, 0.25}}};
  std::ostringstream out;
  write_ellipse_csv(out, {e}, 2);
  EXPECT_EQ(out.str(), "x0,x1,axis0_0,axis0_1,axis1_0,axis1_1,radius0,radius1\n1,2,1,0,0,1,0.5,0.25\n");
}

TEST(Csv, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

}  // namespace
}  // namespace iem::io
