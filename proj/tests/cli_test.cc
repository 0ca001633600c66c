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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "iem/io.hpp"
#include "iem/presets.hpp"
#include "iem/version.hpp"

namespace iem {
namespace {

using io::json;
using testing::CliResult;
using testing::prior_file;
using testing::Scratch;

const std::string kWide = " --gamma-min 0.0009765625 --gamma-max 1024 --steps 200 --paths 50";

json parse(const CliResult& r) {
  EXPECT_EQ(r.exit_code, 0) << r.err;
  return json::parse(r.out);
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string* header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (header != nullptr) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

TEST(Cli, VersionAndHelp) {
  Scratch s("cli");
  const auto v = s.run("--version");
  EXPECT_EQ(v.exit_code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
  EXPECT_EQ(s.run("--help").exit_code, 0);
  EXPECT_EQ(s.run("").exit_code, 2);
}

TEST(Cli, DistIdenticalPointsIsZero) {
  Scratch s("cli");
  const json j = parse(s.run("dist " + prior_file("skewed_mixture") + " --x1 0.5,0.5 --x2 0.5,0.5 --paths 4"));
  EXPECT_EQ(j["value"], 0.0);
  EXPECT_EQ(j["squared_value"], 0.0);
  EXPECT_EQ(j["gamma"].size(), 512u);
  EXPECT_EQ(j["integrand_trace"].size(), 512u);
  EXPECT_EQ(j["manifest"]["command"], "dist");
}

TEST(Cli, DistStandardGaussianIsEuclidean) {
  Scratch s("cli");
  const json j = parse(s.run("dist " + prior_file("identity_gaussian") + " --x1 0,0 --x2 3,4"));
  EXPECT_NEAR(j["value"].get<double>(), 5.0, 0.15);
  EXPECT_TRUE(j.contains("stderr"));
  const json neg = parse(s.run("dist " + prior_file("identity_gaussian") + " --x1=-3,-4 --x2 0,0"));
  EXPECT_EQ(neg["value"], j["value"]);
}

TEST(Cli, DistSquareWeight) {
  Scratch s("cli");
  const std::string base = "dist " + prior_file("correlated_modes") + " --x1 0,1 --x2 0.5,1.5 --paths 3";
  const json plain = parse(s.run(base));
  const json sq = parse(s.run(base + " --f square"));
  EXPECT_EQ(sq["manifest"]["options"]["f"], "square");
  EXPECT_NE(sq["value"], plain["value"]);
  EXPECT_EQ(s.run(base + " --f cube").exit_code, 2);
}

TEST(Cli, UsageErrorsExitTwoAndNameTheFlag) {
  Scratch s("cli");
  const std::string prior = prior_file("skewed_mixture");
  auto check = [&](const std::string& args, const std::string& needle) {
    const auto r = s.run(args);
    EXPECT_EQ(r.exit_code, 2) << args;
    EXPECT_NE(r.err.find(needle), std::string::npos) << args << "\n" << r.err;
  };
  check("dist " + prior + " --x1 0,0 --x2 1,1 --steps abc", "--steps");
  check("dist " + prior + " --x1 0,0 --x2 1,1 --gamma-min 2 --gamma-max 1", "--gamma-max");
  check("dist " + prior + " --x1 0,0 --x2 1,1 --gamma-min 0", "--gamma-min");
  check("dist " + prior + " --x1 0,0 --x2 1,1 --paths 0", "--paths");
  check("dist " + prior + " --x1 0,0,0 --x2 1,1", "--x1");
  check("dist " + prior + " --x1 0,0 --x2 1,nan", "--x2");
  check("dist " + prior + " --x1 0,0 --x2 1,1 --coupling sideways", "--coupling");
  check("dist /nonexistent.json --x1 0,0 --x2 1,1", "PRIOR");
  check("grid " + prior + " --ref 0,1 --bounds 1,0,0,1", "--bounds");
  check("grid " + prior + " --ref 0,1 --bounds 0,1,0,1 --resolution 1", "--resolution");
  check("cluster", "--prior");
  check("validate nope", "nope");
}

TEST(Cli, BadPriorFieldIsReported) {
  Scratch s("cli");
  testing::spit(s / "bad.json", R"({"type": "mixture", "weights": [0.5, 0.5], "components": [
      {"type": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]},
      {"type": "product_laplace", "mu": [0, 0], "b": [1, -1]}]})");
  const auto r = s.run("dist '" + (s / "bad.json").string() + "' --x1 0,0 --x2 1,1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("components[1].b"), std::string::npos) << r.err;
}

TEST(Cli, GridSeparatesModeFromSaddle) {
  Scratch s("cli");
  const auto r = s.run("grid " + prior_file("skewed_mixture") + " --ref 0,1 --bounds=-2,2,-2,2 --resolution 9" + kWide);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::string header;
  const auto rows = parse_csv(r.out, &header);
  EXPECT_EQ(header, "x0,x1,distance");
  ASSERT_EQ(rows.size(), 81u);
  std::map<std::pair<double, double>, double> by_point;
  for (const auto& row : rows) by_point[{row[0], row[1]}] = row[2];
  EXPECT_EQ((by_point[{0.0, 1.0}]), 0.0);
  const double other_mode = by_point[{1.0, -1.0}];
  const double saddle = by_point[{0.0, 0.0}];
  // Euclidean order is the reverse: |(1,-1) - (0,1)| = 2.24 > |(0,0) - (0,1)| = 1.
  EXPECT_LT(other_mode, saddle);

  IntegrationConfig cfg;
  cfg.n_steps = 200;
  cfg.n_paths = 50;
  const Prior p = presets::skewed_mixture();
  EXPECT_EQ(saddle, iem(p, Vector{{0.0, 1.0}}, Vector{{0.0, 0.0}}, cfg));
  EXPECT_EQ(other_mode, iem(p, Vector{{0.0, 1.0}}, Vector{{1.0, -1.0}}, cfg));
}

TEST(Cli, EllipsesCsvShape) {
  Scratch s("cli");
  const auto r = s.run("ellipses " + prior_file("laplace_product") +
                       " --bounds=-4,4,-3,5 --resolution 3 --gamma-min 0.25 --gamma-max 4 --steps 50 --paths 5");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::string header;
  const auto rows = parse_csv(r.out, &header);
  EXPECT_EQ(header, "x0,x1,axis0_0,axis0_1,axis1_0,axis1_1,radius0,radius1");
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& row : rows) {
    ASSERT_EQ(row.size(), 8u);
    EXPECT_NEAR(row[2] * row[2] + row[3] * row[3], 1.0, 1e-12);
    EXPECT_NEAR(row[2] * row[4] + row[3] * row[5], 0.0, 1e-12);
    EXPECT_GT(row[6], 0.0);
    EXPECT_LE(row[6], row[7]);
  }
}

TEST(Cli, LocalFormsAgree) {
  Scratch s("cli");
  const json j = parse(s.run("local " + prior_file("skewed_mixture") + " --x 0.5,0 --steps 100 --paths 10"));
  EXPECT_LE(j["forms_relative_difference"].get<double>(), 1e-9);
  EXPECT_FALSE(j["ellipse"].is_null());
  EXPECT_EQ(j["hessian_form"]["G"].size(), 2u);
}

TEST(Cli, ClusterPriorBeatsEuclidean) {
  Scratch s("cli");
  const json j = parse(s.run("cluster --prior " + prior_file("correlated_modes") + kWide));
  EXPECT_GE(j["iem_accuracy"].get<double>(), 0.9);
  EXPECT_GT(j["iem_accuracy"].get<double>(), j["euclidean_accuracy"].get<double>());
  EXPECT_EQ(j["labels"].size(), 500u);
  EXPECT_EQ(j["iem"]["assignments"].size(), 500u);
}

TEST(Cli, ClusterMatrixWithTruth) {
  Scratch s("cli");
  Matrix d(4, 4);
  d << 0, 1, 9, 9, 1, 0, 9, 9, 9, 9, 0, 1, 9, 9, 1, 0;
  std::ostringstream csv;
  io::write_matrix_csv(csv, d);
  testing::spit(s / "d.csv", csv.str());
  testing::spit(s / "truth.txt", "1\n1\n0\n0\n");
  const std::string base = "cluster --matrix '" + (s / "d.csv").string() + "' --truth '" +
                           (s / "truth.txt").string() + "'";
  const json j = parse(s.run(base));
  EXPECT_EQ(j["accuracy"], 1.0);
  EXPECT_EQ(j["manifest"]["inputs"].size(), 2u);
  EXPECT_EQ(s.run(base + " --k 5").exit_code, 2);
  testing::spit(s / "asym.csv", "0,1\n2,0\n");
  EXPECT_EQ(s.run("cluster --matrix '" + (s / "asym.csv").string() + "'").exit_code, 2);
}

TEST(Cli, ValidateListAndSuite) {
  Scratch s("cli");
  const auto list = s.run("validate --list");
  EXPECT_EQ(list.exit_code, 0);
  for (const char* name : {"mahalanobis", "immse", "axioms", "clustering", "finite_difference"}) {
    EXPECT_NE(list.out.find(name), std::string::npos);
  }
  const json j = parse(s.run("validate isometry"));
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["reports"].size(), 60u);
}

TEST(Cli, OutFileWritesManifestWithInputDigest) {
  Scratch s("cli");
  const std::string out = (s / "d.json").string();
  const auto r = s.run("dist " + prior_file("anisotropic_gaussian") + " --x1 0,0 --x2 1,1 --out '" + out + "'");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const json body = json::parse(testing::slurp(out));
  const json side = json::parse(testing::slurp(out + ".manifest.json"));
  EXPECT_EQ(side["output"], out);
  EXPECT_TRUE(side.contains("wall_clock_seconds"));
  EXPECT_FALSE(body["manifest"].contains("wall_clock_seconds"));
  EXPECT_EQ(side["config"], body["manifest"]["config"]);

  const std::string path = std::string(IEM_PRIORS_DIR) + "/anisotropic_gaussian.json";
  const std::string cmd = "sha256sum '" + path + "' > '" + (s / "sum.txt").string() + "'";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const std::string sum = testing::slurp(s / "sum.txt").substr(0, 64);
  EXPECT_EQ(side["inputs"][0]["sha256"], sum);
  EXPECT_EQ(body["manifest"]["inputs"][0]["sha256"], sum);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  Scratch s("cli");
  const std::vector<std::string> commands{
      "dist " + prior_file("laplace_product") + " --x1 1,2 --x2=-3,0.5 --paths 7 --seed 4",
      "dist " + prior_file("laplace_product") + " --x1 1,2 --x2=-3,0.5 --paths 7 --coupling independent",
      "grid " + prior_file("skewed_mixture") + " --ref 0,1 --bounds=-1,1,-1,1 --resolution 4 --paths 3",
      "local " + prior_file("correlated_modes") + " --x 0.2,0.3 --paths 6 --seed 9",
  };
  for (const auto& c : commands) {
    const auto a = s.run(c);
    const auto b = s.run(c);
    EXPECT_EQ(a.exit_code, 0) << c << a.err;
    EXPECT_EQ(a.out, b.out) << c;
  }
}

}  // namespace
}  // namespace iem
