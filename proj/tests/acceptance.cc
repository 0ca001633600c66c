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

// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
// any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "iem/iem.hpp"
#include "iem/presets.hpp"
#include "iem/validate.hpp"

namespace {

using iem::Matrix;
using iem::Vector;
using iem::validate::CheckReport;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Pass state of a report list and the worst value among upper-bounded checks.
Outcome summarize(const std::vector<CheckReport>& reports) {
  Outcome o{!reports.empty() && iem::validate::all_passed(reports), ""};
  double worst = 0.0;
  std::string failed;
  for (const auto& r : reports) {
    if (!r.lower) worst = std::max(worst, r.measured);
    if (!r.passed) failed += " " + r.name;
  }
  std::ostringstream ss;
  ss << reports.size() << " checks, worst bounded value " << worst;
  if (!failed.empty()) ss << ", failed:" << failed;
  o.detail = ss.str();
  return o;
}

std::vector<CheckReport> only(const std::vector<CheckReport>& reports, const std::string& needle) {
  std::vector<CheckReport> out;
  for (const auto& r : reports) {
    if (r.name.find(needle) != std::string::npos) out.push_back(r);
  }
  return out;
}

iem::IntegrationConfig wide(std::size_t steps, std::size_t paths) {
  iem::IntegrationConfig cfg;
  cfg.gamma_min = 1.0 / 1024.0;
  cfg.gamma_max = 1024.0;
  cfg.n_steps = steps;
  cfg.n_paths = paths;
  return cfg;
}

Outcome mahalanobis() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = summarize(iem::validate::run_suite("mahalanobis"));
  // Independent recomputation for the diagonal case against sqrt(d^T S^-1 d).
  const iem::Prior p = iem::presets::anisotropic_gaussian();
  const Matrix pts = iem::sample(p, 40, 99);
  const auto cfg = wide(200, 50);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector d = pts.row(2 * k) - pts.row(2 * k + 1);
    const double want = std::sqrt(d[0] * d[0] + d[1] * d[1] / 0.1);
    const double got = iem::iem(p, pts.row(2 * k).transpose(), pts.row(2 * k + 1).transpose(), cfg);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  const double secs = seconds_since(t0);
  o.passed = o.passed && worst <= 0.03 && secs < 30.0;
  o.detail += "; oracle max rel " + std::to_string(worst) + "; " + std::to_string(secs) + " s";
  return o;
}

Outcome scalar_unit() {
  const iem::Prior p = iem::Prior::gaussian(Vector{{0.0}}, Matrix{{1.0}});
  const auto cfg = wide(200, 50);
  const double got = iem::iem_squared(p, Vector{{0.0}}, Vector{{1.0}}, cfg).squared_value;
  // Score difference is -1/(1 + g), so the integral of its square times g is 1/(1+a) - 1/(1+b).
  const double closed = 1.0 / (1.0 + cfg.gamma_min) - 1.0 / (1.0 + cfg.gamma_max);
  const double rel = std::abs(got - 1.0);
  return {rel <= 0.03 && std::abs(closed - 1.0) <= 0.03,
          "IEM^2 = " + std::to_string(got) + ", closed form over range " + std::to_string(closed)};
}

Outcome run_named(const std::string& suite) { return summarize(iem::validate::run_suite(suite)); }

Outcome immse() {
  const auto reports = iem::validate::run_suite("immse");
  Outcome pointwise = summarize(only(reports, "seed"));
  Outcome ratio = summarize(only(reports, "convergence"));
  return {pointwise.passed && ratio.passed, "pointwise " + pointwise.detail + "; ratio " + ratio.detail};
}

Outcome clustering() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = run_named("clustering");
  const double secs = seconds_since(t0);
  o.passed = o.passed && secs < 120.0;
  o.detail += "; " + std::to_string(secs) + " s";
  return o;
}

Outcome cli_determinism() {
  iem::testing::Scratch s("acceptance");
  using iem::testing::prior_file;
  const std::vector<std::string> commands{
      "dist " + prior_file("skewed_mixture") + " --x1 0,1 --x2=1,-1 --paths 8 --seed 3",
      "dist " + prior_file("laplace_product") + " --x1 0,1 --x2 2,2 --f square --coupling independent --paths 4",
      "grid " + prior_file("skewed_mixture") + " --ref 0,1 --bounds=-2,2,-2,2 --resolution 5 --paths 4",
      "ellipses " + prior_file("laplace_product") + " --bounds=-2,2,-1,3 --resolution 3 --steps 64 --paths 4",
      "local " + prior_file("correlated_modes") + " --x 0.3,0.1 --paths 8",
      "cluster --prior " + prior_file("correlated_modes") + " --samples 60 --steps 64 --paths 4 --seed 2",
      "validate isometry",
      "validate --list",
  };
  int failures = 0;
  std::string failed;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const std::string outfile = (s / ("o" + std::to_string(i))).string();
    std::string bodies[2];
    std::string streams[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const auto r = s.run(commands[i]);
      ok = ok && r.exit_code == 0;
      streams[rep] = r.out;
      if (commands[i].find("--list") == std::string::npos) {
        const auto f = s.run(commands[i] + " --out '" + outfile + "'");
        ok = ok && f.exit_code == 0;
        bodies[rep] = iem::testing::slurp(outfile);
      }
    }
    ok = ok && !streams[0].empty() && streams[0] == streams[1] && bodies[0] == bodies[1];
    if (commands[i].find("--list") == std::string::npos) ok = ok && bodies[0] == streams[0];
    if (!ok) {
      ++failures;
      failed += " [" + commands[i] + "]";
    }
  }
  return {failures == 0, std::to_string(commands.size()) + " commands" + (failed.empty() ? "" : ", differ:" + failed)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Mahalanobis reduction for Gaussian priors within 3% in under 30 s", mahalanobis},
      {"1D unit Gaussian with unit shift gives IEM^2 = 1 within 3%", scalar_unit},
      {"Hessian and covariance local metrics agree and match the Gaussian closed form",
       [] { return run_named("local_metric"); }},
      {"Quadratic expansion of IEM^2 at five mixture anchors within 5%",
       [] { return run_named("quadratic_expansion"); }},
      {"Average metric, negative Hessian and score outer product agree within 5%",
       [] { return run_named("average_metric"); }},
      {"Mismatched-prior average matches the KL divergence within 5%", [] { return run_named("kl"); }},
      {"Pointwise I-MMSE within 5% and error ratio under step doubling in [1.5, 3]", immse},
      {"Metric axioms on 100 triples for all three illustration priors", [] { return run_named("axioms"); }},
      {"Isometry invariance to 1e-12 over 20 isometries", [] { return run_named("isometry"); }},
      {"K-medoids IEM accuracy >= 0.9 and above Euclidean in under 2 min", clustering},
      {"Finite-difference scores and Hessians across families and SNRs",
       [] { return run_named("finite_difference"); }},
      {"Repeated CLI commands give byte-identical outputs", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::printf("%s %zu %s (%s)\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
