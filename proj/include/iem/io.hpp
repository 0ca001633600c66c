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

#ifndef IEM_IO_HPP_
#define IEM_IO_HPP_

// JSON and CSV serialization for priors, configs and results.
//
// Prior files:
//   {"type": "gaussian", "mean": [...], "cov": [[...], ...]}
//   {"type": "product_laplace", "mu": [...], "b": [...]}
//   {"type": "mixture", "weights": [...], "components": [<gaussian|product_laplace>, ...]}
//
// Numbers in CSV are written in shortest round-trip form, so reading a
// written matrix back recovers it exactly.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iem/cluster.hpp"
#include "iem/error.hpp"
#include "iem/iem.hpp"
#include "iem/local_metric.hpp"
#include "iem/prior.hpp"

namespace iem::io {

using json = nlohmann::ordered_json;

namespace detail {

inline Error field_error(const std::string& field, const std::string& what) {
  return Error(ErrorCode::kParse, field + ": " + what);
}

inline const json& member(const json& obj, const std::string& key, const std::string& where) {
  const std::string field = where.empty() ? key : where + "." + key;
  if (!obj.is_object() || !obj.contains(key)) throw field_error(field, "missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw field_error(field, "expected a number");
  return v.get<double>();
}

inline Vector vector_field(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw field_error(field, "expected a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Matrix matrix_field(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw field_error(field, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  const json& first = v[0];
  if (!first.is_array() || first.empty()) throw field_error(field + "[0]", "expected an array");
  const std::size_t cols = first.size();
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_field = field + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) {
      throw field_error(row_field, "expected " + std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(v[r][c], row_field + "[" + std::to_string(c) + "]");
    }
  }
  return out;
}

/// Runs make(), prefixing construction errors with the field path.
template <typename Make>
auto with_field(const std::string& where, Make&& make) {
  try {
    return make();
  } catch (const Error& e) {
    if (where.empty() || e.code() == ErrorCode::kParse) throw;
    throw Error(e.code(), where + "." + e.message());
  }
}

inline Prior leaf_from_json(const json& j, const std::string& where) {
  const json& type = member(j, "type", where);
  const std::string type_field = where.empty() ? "type" : where + ".type";
  if (!type.is_string()) throw field_error(type_field, "expected a string");
  const auto prefix = [&](const char* key) { return where.empty() ? key : where + "." + key; };
  const std::string t = type.get<std::string>();
  if (t == "gaussian") {
    Vector mean = vector_field(member(j, "mean", where), prefix("mean"));
    Matrix cov = matrix_field(member(j, "cov", where), prefix("cov"));
    return with_field(where, [&] { return Prior::gaussian(std::move(mean), std::move(cov)); });
  }
  if (t == "product_laplace") {
    Vector mu = vector_field(member(j, "mu", where), prefix("mu"));
    Vector b = vector_field(member(j, "b", where), prefix("b"));
    return with_field(where, [&] { return Prior::product_laplace(std::move(mu), std::move(b)); });
  }
  if (t == "mixture") throw field_error(type_field, "mixtures cannot be nested");
  throw field_error(type_field, "unknown prior type '" + t + "'");
}

}  // namespace detail

inline Prior prior_from_json(const json& j) {
  const json& type = detail::member(j, "type", "");
  if (type.is_string() && type.get<std::string>() == "mixture") {
    const json& w = detail::member(j, "weights", "");
    const Vector weights = detail::vector_field(w, "weights");
    const json& comps = detail::member(j, "components", "");
    if (!comps.is_array() || comps.empty()) {
      throw detail::field_error("components", "expected a non-empty array");
    }
    std::vector<Prior> leaves;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      leaves.push_back(detail::leaf_from_json(comps[k], "components[" + std::to_string(k) + "]"));
    }
    return Prior::mixture(std::vector<double>(weights.begin(), weights.end()), leaves);
  }
  return detail::leaf_from_json(j, "");
}

inline Prior parse_prior(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("prior: invalid JSON: ") + e.what());
  }
  return prior_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Prior load_prior(const std::string& path) { return parse_prior(read_file(path)); }

inline json to_json(const Vector& v) { return json(std::vector<double>(v.begin(), v.end())); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Vector row = m.row(r).transpose();
    rows.push_back(to_json(row));
  }
  return rows;
}

inline json leaf_to_json(const GaussianPrior& g) {
  return json{{"type", "gaussian"}, {"mean", to_json(g.mean())}, {"cov", to_json(g.cov())}};
}

inline json leaf_to_json(const ProductLaplacePrior& l) {
  return json{{"type", "product_laplace"}, {"mu", to_json(l.location())}, {"b", to_json(l.scale())}};
}

inline json to_json(const Prior& prior) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixturePrior>) {
          json comps = json::array();
          for (const auto& c : p.components()) {
            comps.push_back(std::visit([](const auto& leaf) { return leaf_to_json(leaf); }, c));
          }
          return json{{"type", "mixture"}, {"weights", p.weights()}, {"components", comps}};
        } else {
          return leaf_to_json(p);
        }
      },
      prior.rep());
}

inline std::string_view to_string(Coupling c) {
  return c == Coupling::kShared ? "shared" : "independent";
}

inline json to_json(const IntegrationConfig& cfg) {
  return json{{"gamma_min", cfg.gamma_min}, {"gamma_max", cfg.gamma_max},
              {"steps", cfg.n_steps},       {"paths", cfg.n_paths},
              {"seed", cfg.seed},           {"coupling", to_string(cfg.coupling)}};
}

inline json to_json(const DistanceEstimate& e) {
  return json{{"value", e.value},
              {"squared_value", e.squared_value},
              {"stderr", e.std_error},
              {"integrand_trace", e.integrand_trace}};
}

inline json to_json(const LocalMetric& m) {
  return json{{"x", to_json(m.x)},
              {"gamma_max", m.gamma_max},
              {"G", to_json(m.G)},
              {"eigenvalues", to_json(m.eigenvalues)},
              {"eigenvectors", to_json(m.eigenvectors)}};
}

inline json to_json(const Ellipse& e) {
  return json{{"center", to_json(e.center)}, {"axes", to_json(e.axes)}, {"radii", to_json(e.radii)}};
}

inline json to_json(const ClusteringResult& r) {
  return json{{"medoid_indices", r.medoid_indices}, {"assignments", r.assignments},
              {"total_cost", r.total_cost},         {"iterations", r.iterations},
              {"converged", r.converged},           {"cost_history", r.cost_history}};
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Matrix CSV with a header row of column indices and a leading index column.
inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out << "index";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace detail

/// Reads a numeric CSV matrix. A first row with any non-numeric cell is a
/// header; if that header starts with "index" or an empty cell, the first
/// column holds row labels (the layout of write_matrix_csv).
inline Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw Error(ErrorCode::kParse, "matrix: file is empty");
  double probe = 0.0;
  bool header_row = false;
  for (const auto& cell : rows.front()) header_row |= !detail::parse_number(cell, probe);
  const std::size_t first_row = header_row ? 1 : 0;
  const bool index_col = header_row && !rows.front().empty() &&
                         (rows.front().front().empty() || rows.front().front() == "index");
  const std::size_t first_col = index_col ? 1 : 0;
  if (rows.size() <= first_row) throw Error(ErrorCode::kParse, "matrix: no data rows");
  const std::size_t cols = rows[first_row].size() - first_col;
  Matrix m(static_cast<Eigen::Index>(rows.size() - first_row), static_cast<Eigen::Index>(cols));
  for (std::size_t r = first_row; r < rows.size(); ++r) {
    if (rows[r].size() != cols + first_col) {
      throw Error(ErrorCode::kParse, "matrix: row " + std::to_string(r + 1) + " has " +
                                         std::to_string(rows[r].size()) + " cells, expected " +
                                         std::to_string(cols + first_col));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!detail::parse_number(rows[r][c + first_col], v)) {
        throw Error(ErrorCode::kParse, "matrix: row " + std::to_string(r + 1) + " column " +
                                           std::to_string(c + first_col + 1) + " is not a number");
      }
      m(static_cast<Eigen::Index>(r - first_row), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

inline Matrix load_matrix_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_matrix_csv(in);
}

/// One row per ellipse: center x0..x{d-1}, axis{j}_{i} (component i of axis
/// j), then radius0..radius{d-1}.
inline void write_ellipse_csv(std::ostream& out, const std::vector<Ellipse>& field, Eigen::Index d) {
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << 'x' << i;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) out << ",axis" << j << '_' << i;
  }
  for (Eigen::Index j = 0; j < d; ++j) out << ",radius" << j;
  out << '\n';
  for (const auto& e : field) {
    for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << format_double(e.center[i]);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(e.axes(i, j));
    }
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(e.radii[j]);
    out << '\n';
  }
}

}  // namespace iem::io

#endif  // IEM_IO_HPP_
