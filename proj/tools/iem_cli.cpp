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

// iem_cli: distances, local metrics, clustering and validation suites from
// the command line. Run `iem_cli --help` or `iem_cli <command> --help`.
//
// Exit status: 0 on success, 1 when a validation check or computation
// fails, 2 on usage, configuration or input errors.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iem/iem.hpp"
#include "iem/io.hpp"
#include "iem/local_metric.hpp"
#include "iem/validate.hpp"
#include "iem/version.hpp"

namespace {

using iem::Matrix;
using iem::Vector;
using json = iem::io::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Usage error that names the offending flag.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

/// Flags shared by every command that integrates over the SNR range.
struct CommonFlags {
  double gamma_min = 1.0 / 1024.0;
  double gamma_max = 1024.0;
  std::size_t steps = 512;
  std::size_t paths = 1;
  std::uint64_t seed = 0;
  std::string coupling = "shared";
  std::string out;

  iem::IntegrationConfig config() const {
    if (!(std::isfinite(gamma_min) && gamma_min > 0.0)) throw UsageError("--gamma-min: must be > 0");
    if (!(std::isfinite(gamma_max) && gamma_max > gamma_min)) {
      throw UsageError("--gamma-max: must be finite and greater than --gamma-min");
    }
    if (steps < 2) throw UsageError("--steps: must be >= 2");
    if (paths < 1) throw UsageError("--paths: must be >= 1");
    iem::IntegrationConfig cfg;
    cfg.gamma_min = gamma_min;
    cfg.gamma_max = gamma_max;
    cfg.n_steps = steps;
    cfg.n_paths = paths;
    cfg.seed = seed;
    cfg.coupling = coupling == "independent" ? iem::Coupling::kIndependent : iem::Coupling::kShared;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f, bool integration) {
  if (integration) {
    cmd->add_option("--gamma-min", f.gamma_min, "Lower end of the SNR range")->capture_default_str();
    cmd->add_option("--gamma-max", f.gamma_max, "Upper end of the SNR range")->capture_default_str();
    cmd->add_option("--steps", f.steps, "Number of log-uniform SNR nodes")->capture_default_str();
    cmd->add_option("--paths", f.paths, "Number of Brownian paths")->capture_default_str();
    cmd->add_option("--coupling", f.coupling, "Noise coupling between the two points")
        ->check(CLI::IsMember({"shared", "independent"}))
        ->capture_default_str();
  }
  cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", f.out, "Output file (default: stdout); also writes FILE.manifest.json");
}

/// A point given as comma-separated coordinates.
Vector parse_point(const std::string& text, const std::string& flag, Eigen::Index d) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double x = 0.0;
    if (!iem::io::detail::parse_number(cell, x) || !std::isfinite(x)) {
      throw UsageError(flag + ": '" + cell + "' is not a finite number");
    }
    v.push_back(x);
  }
  if (static_cast<Eigen::Index>(v.size()) != d) {
    throw UsageError(flag + ": expected " + std::to_string(d) + " coordinates, got " +
                     std::to_string(v.size()));
  }
  return Eigen::Map<Vector>(v.data(), d);
}

struct Bounds {
  Vector lo, hi;
};

/// "lo0,hi0[,lo1,hi1]" for a one- or two-dimensional lattice.
Bounds parse_bounds(const std::string& text, Eigen::Index d) {
  if (d > 2) throw UsageError("--bounds: lattices are available for 1D and 2D priors only");
  const Vector flat = parse_point(text, "--bounds", 2 * d);
  Bounds b{Vector(d), Vector(d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    b.lo[i] = flat[2 * i];
    b.hi[i] = flat[2 * i + 1];
    if (!(b.lo[i] < b.hi[i])) throw UsageError("--bounds: each lower bound must be below its upper bound");
  }
  return b;
}

std::vector<Vector> lattice(const Bounds& b, std::size_t resolution) {
  if (resolution < 2) throw UsageError("--resolution: must be >= 2");
  const auto d = b.lo.size();
  std::vector<Vector> pts;
  const auto coord = [&](Eigen::Index axis, std::size_t i) {
    return b.lo[axis] + (b.hi[axis] - b.lo[axis]) * static_cast<double>(i) /
                            static_cast<double>(resolution - 1);
  };
  if (d == 1) {
    for (std::size_t i = 0; i < resolution; ++i) pts.push_back(Vector::Constant(1, coord(0, i)));
    return pts;
  }
  for (std::size_t j = 0; j < resolution; ++j) {
    for (std::size_t i = 0; i < resolution; ++i) pts.push_back(Vector{{coord(0, i), coord(1, j)}});
  }
  return pts;
}

struct Input {
  std::string path;
  std::string bytes;
};

Input read_input(const std::string& path, const std::string& flag) {
  try {
    return {path, iem::io::read_file(path)};
  } catch (const iem::Error&) {
    throw UsageError(flag + ": cannot read '" + path + "'");
  }
}

iem::Prior parse_prior_input(const Input& in) {
  try {
    return iem::io::parse_prior(in.bytes);
  } catch (const iem::Error& e) {
    throw UsageError("prior file '" + in.path + "': " + e.message());
  }
}

/// Deterministic provenance record embedded in outputs; the sidecar adds
/// timing.
json manifest(const std::string& command, const std::vector<Input>& inputs,
              const std::optional<iem::IntegrationConfig>& cfg, std::uint64_t seed,
              json options) {
  json files = json::array();
  for (const auto& in : inputs) files.push_back({{"path", in.path}, {"sha256", sha256_hex(in.bytes)}});
  json m{{"tool", "iem_cli"}, {"tool_version", iem::kVersion}, {"command", command},
         {"inputs", files}, {"seed", seed}};
  m["config"] = cfg ? iem::io::to_json(*cfg) : json(nullptr);
  m["options"] = std::move(options);
  return m;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes the primary output to --out (or stdout) and the sidecar manifest.
class Emitter {
 public:
  explicit Emitter(const std::string& out) : out_(out), start_(std::chrono::system_clock::now()) {}

  void emit(const std::string& body, json m) const {
    if (out_.empty()) {
      std::cout << body;
      std::cout.flush();
      return;
    }
    write_file(out_, body);
    const auto end = std::chrono::system_clock::now();
    m["output"] = out_;
    m["started_at"] = utc_timestamp(start_);
    m["wall_clock_seconds"] = std::chrono::duration<double>(end - start_).count();
    write_file(out_ + ".manifest.json", m.dump(2) + "\n");
  }

 private:
  static void write_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("--out: cannot write '" + path + "'");
    f << body;
  }

  std::string out_;
  std::chrono::system_clock::time_point start_;
};

json vec_json(const Vector& v) { return iem::io::to_json(v); }

// ---------------------------------------------------------------- commands

struct DistArgs {
  CommonFlags common;
  std::string prior;
  std::string x1, x2;
  std::string f = "identity";
};

int run_dist(const DistArgs& a) {
  const auto cfg = a.common.config();
  const Input in = read_input(a.prior, "PRIOR");
  const iem::Prior prior = parse_prior_input(in);
  const Vector x1 = parse_point(a.x1, "--x1", prior.dim());
  const Vector x2 = parse_point(a.x2, "--x2", prior.dim());
  const Emitter emitter(a.common.out);
  const iem::DistanceEstimate est =
      a.f == "square" ? iem::iem_f(prior, x1, x2, iem::FPrime::square(), cfg)
                      : iem::iem_squared(prior, x1, x2, cfg);
  json out = iem::io::to_json(est);
  const iem::SnrGrid grid = cfg.grid();
  out["gamma"] = std::vector<double>(grid.nodes().begin(), grid.nodes().end());
  const json m = manifest("dist", {in}, cfg, cfg.seed,
                          {{"x1", vec_json(x1)}, {"x2", vec_json(x2)}, {"f", a.f}});
  out["manifest"] = m;
  emitter.emit(out.dump(2) + "\n", m);
  return kExitOk;
}

struct LatticeArgs {
  CommonFlags common;
  std::string prior;
  std::string ref;
  std::string bounds;
  std::size_t resolution = 41;
};

int run_grid(const LatticeArgs& a) {
  const auto cfg = a.common.config();
  const Input in = read_input(a.prior, "PRIOR");
  const iem::Prior prior = parse_prior_input(in);
  const Vector ref = parse_point(a.ref, "--ref", prior.dim());
  const auto pts = lattice(parse_bounds(a.bounds, prior.dim()), a.resolution);
  const Emitter emitter(a.common.out);
  std::vector<double> dist(pts.size());
  // Every lattice point is evaluated on the path set drawn from cfg.
  iem::detail::parallel_for(pts.size(), [&](std::size_t i) { dist[i] = iem::iem(prior, ref, pts[i], cfg); });
  std::ostringstream csv;
  const auto d = prior.dim();
  for (Eigen::Index i = 0; i < d; ++i) csv << (i ? "," : "") << 'x' << i;
  csv << ",distance\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (Eigen::Index c = 0; c < d; ++c) csv << (c ? "," : "") << iem::io::format_double(pts[i][c]);
    csv << ',' << iem::io::format_double(dist[i]) << '\n';
  }
  emitter.emit(csv.str(), manifest("grid", {in}, cfg, cfg.seed,
                                   {{"ref", vec_json(ref)}, {"bounds", a.bounds},
                                    {"resolution", a.resolution}}));
  return kExitOk;
}

int run_ellipses(const LatticeArgs& a) {
  const auto cfg = a.common.config();
  const Input in = read_input(a.prior, "PRIOR");
  const iem::Prior prior = parse_prior_input(in);
  const auto pts = lattice(parse_bounds(a.bounds, prior.dim()), a.resolution);
  const Emitter emitter(a.common.out);
  std::vector<iem::Ellipse> field(pts.size());
  iem::detail::parallel_for(pts.size(), [&](std::size_t i) {
    field[i] = iem::ellipse(iem::metric_hessian_form(prior, pts[i], cfg));
  });
  std::ostringstream csv;
  iem::io::write_ellipse_csv(csv, field, prior.dim());
  emitter.emit(csv.str(), manifest("ellipses", {in}, cfg, cfg.seed,
                                   {{"bounds", a.bounds}, {"resolution", a.resolution}}));
  return kExitOk;
}

struct LocalArgs {
  CommonFlags common;
  std::string prior;
  std::string x;
};

int run_local(const LocalArgs& a) {
  const auto cfg = a.common.config();
  const Input in = read_input(a.prior, "PRIOR");
  const iem::Prior prior = parse_prior_input(in);
  const Vector x = parse_point(a.x, "--x", prior.dim());
  const Emitter emitter(a.common.out);
  const iem::LocalMetric h = iem::metric_hessian_form(prior, x, cfg);
  const iem::LocalMetric c = iem::metric_cov_form(prior, x, cfg);
  json out{{"hessian_form", iem::io::to_json(h)},
           {"cov_form", iem::io::to_json(c)},
           {"forms_relative_difference", (h.G - c.G).norm() / std::max(h.G.norm(), 1e-300)}};
  try {
    out["ellipse"] = iem::io::to_json(iem::ellipse(h));
  } catch (const iem::Error&) {
    out["ellipse"] = nullptr;
  }
  const json m = manifest("local", {in}, cfg, cfg.seed, {{"x", vec_json(x)}});
  out["manifest"] = m;
  emitter.emit(out.dump(2) + "\n", m);
  return kExitOk;
}

struct ClusterArgs {
  CommonFlags common;
  std::string prior;
  std::string matrix;
  std::string truth;
  std::size_t k = 2;
  std::size_t samples = 500;
  std::size_t max_iter = 100;
};

std::vector<int> parse_labels(const Input& in) {
  std::vector<int> labels;
  std::string cell;
  for (char ch : in.bytes + "\n") {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') {
      if (!cell.empty()) {
        double v = 0.0;
        if (!iem::io::detail::parse_number(cell, v) || v != std::floor(v)) {
          throw UsageError("--truth: '" + cell + "' is not an integer label");
        }
        labels.push_back(static_cast<int>(v));
        cell.clear();
      }
    } else {
      cell.push_back(ch);
    }
  }
  return labels;
}

json clustering_json(const iem::ClusteringResult& r, std::optional<double> acc) {
  json j = iem::io::to_json(r);
  j["accuracy"] = acc ? json(*acc) : json(nullptr);
  return j;
}

int run_cluster(const ClusterArgs& a) {
  if (a.prior.empty() == a.matrix.empty()) throw UsageError("--prior/--matrix: give exactly one");
  if (a.k < 1) throw UsageError("--k: must be >= 1");
  const Emitter emitter(a.common.out);
  json out;
  json m;
  if (!a.prior.empty()) {
    const auto cfg = a.common.config();
    if (cfg.coupling != iem::Coupling::kShared) throw UsageError("--coupling: cluster needs shared paths");
    if (a.samples < a.k) throw UsageError("--samples: must be >= --k");
    const Input in = read_input(a.prior, "--prior");
    const iem::Prior prior = parse_prior_input(in);
    const auto c = iem::validate::compare_clustering(prior, a.samples, a.k, cfg, cfg.seed);
    out = {{"samples", a.samples},
           {"k", a.k},
           {"labels", c.sample.labels},
           {"iem", clustering_json(c.iem_result, c.iem_accuracy)},
           {"euclidean", clustering_json(c.euclidean_result, c.euclidean_accuracy)},
           {"iem_accuracy", c.iem_accuracy},
           {"euclidean_accuracy", c.euclidean_accuracy}};
    m = manifest("cluster", {in}, cfg, cfg.seed, {{"samples", a.samples}, {"k", a.k}});
  } else {
    const Input in = read_input(a.matrix, "--matrix");
    Matrix d;
    try {
      std::istringstream ss(in.bytes);
      d = iem::io::read_matrix_csv(ss);
    } catch (const iem::Error& e) {
      throw UsageError("--matrix: " + e.message());
    }
    std::vector<Input> inputs{in};
    std::optional<std::vector<int>> truth;
    if (!a.truth.empty()) {
      inputs.push_back(read_input(a.truth, "--truth"));
      truth = parse_labels(inputs.back());
      if (truth->size() != static_cast<std::size_t>(d.rows())) {
        throw UsageError("--truth: expected " + std::to_string(d.rows()) + " labels");
      }
    }
    try {
      iem::validate_distance_matrix(d);
    } catch (const iem::Error& e) {
      throw UsageError("--matrix: " + e.message());
    }
    if (a.k > static_cast<std::size_t>(d.rows())) throw UsageError("--k: exceeds the number of points");
    const auto r = iem::kmedoids(d, a.k, a.common.seed, a.max_iter);
    std::optional<double> acc;
    if (truth) acc = iem::accuracy(r.assignments, *truth, a.k);
    out = clustering_json(r, acc);
    m = manifest("cluster", inputs, std::nullopt, a.common.seed, {{"k", a.k}, {"max_iter", a.max_iter}});
  }
  out["manifest"] = m;
  emitter.emit(out.dump(2) + "\n", m);
  return kExitOk;
}

struct ValidateArgs {
  CommonFlags common;
  std::string suite = "all";
  bool list = false;
};

int run_validate(const ValidateArgs& a) {
  if (a.list) {
    for (const auto& s : iem::validate::suites()) std::cout << s.name << "\t" << s.summary << "\n";
    return kExitOk;
  }
  bool known = a.suite == "all";
  for (const auto& s : iem::validate::suites()) known |= s.name == a.suite;
  if (!known) throw UsageError("SUITE: unknown suite '" + a.suite + "' (try --list)");
  const Emitter emitter(a.common.out);
  const auto reports = iem::validate::run_suite(a.suite);
  json out{{"suite", a.suite},
           {"passed", iem::validate::all_passed(reports)},
           {"reports", iem::validate::to_json(reports)}};
  const json m = manifest("validate", {}, std::nullopt, a.common.seed, {{"suite", a.suite}});
  out["manifest"] = m;
  emitter.emit(out.dump(2) + "\n", m);
  for (const auto& r : reports) {
    if (!r.passed) std::cerr << "FAIL " << r.name << " measured=" << r.measured << "\n";
  }
  return iem::validate::all_passed(reports) ? kExitOk : kExitFailure;
}

bool is_usage_code(iem::ErrorCode c) {
  switch (c) {
    case iem::ErrorCode::kInvalidPrior:
    case iem::ErrorCode::kInvalidGamma:
    case iem::ErrorCode::kInvalidRange:
    case iem::ErrorCode::kInvalidArgument:
    case iem::ErrorCode::kDimensionMismatch:
    case iem::ErrorCode::kInvalidMatrix:
    case iem::ErrorCode::kBadK:
    case iem::ErrorCode::kTooManyClusters:
    case iem::ErrorCode::kParse:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-estimation distances, local metrics and checks for analytic priors"};
  app.set_version_flag("--version", std::string(iem::kVersion));
  app.require_subcommand(1);

  DistArgs dist;
  auto* c_dist = app.add_subcommand("dist", "Distance between two points, as JSON");
  c_dist->add_option("PRIOR", dist.prior, "Prior JSON file")->required();
  c_dist->add_option("--x1", dist.x1, "First point, comma separated")->required();
  c_dist->add_option("--x2", dist.x2, "Second point, comma separated")->required();
  c_dist->add_option("--f", dist.f, "Reweighting function f")
      ->check(CLI::IsMember({"identity", "square"}))
      ->capture_default_str();
  add_common(c_dist, dist.common, true);

  LatticeArgs grid;
  auto* c_grid = app.add_subcommand("grid", "Distances from a reference point over a lattice, as CSV");
  c_grid->add_option("PRIOR", grid.prior, "Prior JSON file")->required();
  c_grid->add_option("--ref", grid.ref, "Reference point, comma separated")->required();
  c_grid->add_option("--bounds", grid.bounds, "lo0,hi0[,lo1,hi1]")->required();
  c_grid->add_option("--resolution", grid.resolution, "Nodes per axis")->capture_default_str();
  add_common(c_grid, grid.common, true);

  LatticeArgs ell;
  auto* c_ell = app.add_subcommand("ellipses", "Discrimination ellipses over a lattice, as CSV");
  c_ell->add_option("PRIOR", ell.prior, "Prior JSON file")->required();
  c_ell->add_option("--bounds", ell.bounds, "lo0,hi0[,lo1,hi1]")->required();
  c_ell->add_option("--resolution", ell.resolution, "Nodes per axis")->capture_default_str();
  add_common(c_ell, ell.common, true);

  LocalArgs local;
  auto* c_local = app.add_subcommand("local", "Local metric at a point in both forms, as JSON");
  c_local->add_option("PRIOR", local.prior, "Prior JSON file")->required();
  c_local->add_option("--x", local.x, "Anchor point, comma separated")->required();
  add_common(c_local, local.common, true);

  ClusterArgs cl;
  auto* c_cl = app.add_subcommand("cluster", "K-medoids on prior samples or a distance matrix");
  c_cl->add_option("--prior", cl.prior, "Prior JSON file: sample, cluster under IEM and Euclidean");
  c_cl->add_option("--matrix", cl.matrix, "Distance matrix CSV to cluster directly");
  c_cl->add_option("--truth", cl.truth, "Ground-truth labels for --matrix");
  c_cl->add_option("--k", cl.k, "Number of clusters")->capture_default_str();
  c_cl->add_option("--samples", cl.samples, "Samples drawn with --prior")->capture_default_str();
  c_cl->add_option("--max-iter", cl.max_iter, "K-medoids iteration cap")->capture_default_str();
  add_common(c_cl, cl.common, true);

  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "Run validation suites; nonzero exit on failure");
  c_val->add_option("SUITE", val.suite, "Suite name or 'all'")->capture_default_str();
  c_val->add_flag("--list", val.list, "List suites and exit");
  add_common(c_val, val.common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*c_dist) return run_dist(dist);
    if (*c_grid) return run_grid(grid);
    if (*c_ell) return run_ellipses(ell);
    if (*c_local) return run_local(local);
    if (*c_cl) return run_cluster(cl);
    if (*c_val) return run_validate(val);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const iem::Error& e) {
    std::cerr << "error [" << iem::to_string(e.code()) << "]: " << e.message() << "\n";
    return is_usage_code(e.code()) ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
