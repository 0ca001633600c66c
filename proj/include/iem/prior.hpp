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

#ifndef IEM_PRIOR_HPP_
#define IEM_PRIOR_HPP_

// Analytic prior densities and their Gaussian-blurred versions.
//
// A prior p_x is observed through the channel y = gamma * x + w with
// w ~ N(0, gamma I). Everything here is closed form: the blurred
// log-density, its score and Hessian, the posterior mean (Tweedie) and the
// posterior covariance (second-order Tweedie).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "iem/error.hpp"
#include "iem/special.hpp"

namespace iem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class PriorKind { kGaussian, kProductLaplace, kMixture };

/// Multivariate normal N(mean, cov) with cov symmetric positive-definite.
class GaussianPrior {
 public:
  GaussianPrior(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto d = mean_.size();
    detail::require(d >= 1, ErrorCode::kInvalidPrior, "mean: dimension must be >= 1");
    detail::require(cov_.rows() == d && cov_.cols() == d, ErrorCode::kInvalidPrior,
                    "cov: must be " + std::to_string(d) + "x" + std::to_string(d));
    detail::require(mean_.allFinite() && cov_.allFinite(), ErrorCode::kInvalidPrior,
                    "mean/cov: entries must be finite");
    const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    detail::require(asym <= 1e-12 * std::max(1.0, cov_.cwiseAbs().maxCoeff()),
                    ErrorCode::kInvalidPrior, "cov: matrix is not symmetric");
    cov_ = 0.5 * (cov_ + cov_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    detail::require(eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0,
                    ErrorCode::kInvalidPrior, "cov: matrix is not positive-definite");
    spectrum_ = eig.eigenvalues();
    basis_ = eig.eigenvectors();
  }

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  /// cov = basis * diag(spectrum) * basis^T.
  const Matrix& basis() const { return basis_; }
  const Vector& spectrum() const { return spectrum_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix cov_;
  Matrix basis_;
  Vector spectrum_;
};

/// Product of independent Laplace(location_i, scale_i) coordinates.
class ProductLaplacePrior {
 public:
  ProductLaplacePrior(Vector location, Vector scale)
      : location_(std::move(location)), scale_(std::move(scale)) {
    detail::require(location_.size() >= 1, ErrorCode::kInvalidPrior, "mu: dimension must be >= 1");
    detail::require(scale_.size() == location_.size(), ErrorCode::kInvalidPrior,
                    "b: length must match mu");
    detail::require(location_.allFinite() && scale_.allFinite(), ErrorCode::kInvalidPrior,
                    "mu/b: entries must be finite");
    detail::require(scale_.minCoeff() > 0.0, ErrorCode::kInvalidPrior, "b: entries must be > 0");
  }

  const Vector& location() const { return location_; }
  const Vector& scale() const { return scale_; }
  Eigen::Index dim() const { return location_.size(); }

 private:
  Vector location_;
  Vector scale_;
};

using MixtureComponent = std::variant<GaussianPrior, ProductLaplacePrior>;

/// Finite mixture over Gaussian / product-Laplace leaves (nesting depth 1).
class MixturePrior {
 public:
  MixturePrior(std::vector<double> weights, std::vector<MixtureComponent> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    detail::require(!components_.empty(), ErrorCode::kInvalidPrior,
                    "components: at least one component required");
    detail::require(weights_.size() == components_.size(), ErrorCode::kInvalidPrior,
                    "weights: length must match components");
    double total = 0.0;
    for (double w : weights_) {
      detail::require(std::isfinite(w) && w > 0.0, ErrorCode::kInvalidPrior,
                      "weights: entries must be > 0");
      total += w;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, ErrorCode::kInvalidPrior,
                    "weights: must sum to 1");
    dim_ = std::visit([](const auto& c) { return c.dim(); }, components_.front());
    for (const auto& c : components_) {
      detail::require(std::visit([](const auto& leaf) { return leaf.dim(); }, c) == dim_,
                      ErrorCode::kInvalidPrior, "components: dimensions differ");
    }
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
  }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  Eigen::Index dim() const { return dim_; }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<MixtureComponent> components_;
  Eigen::Index dim_ = 0;
};

/// Immutable tagged prior density.
class Prior {
 public:
  using Rep = std::variant<GaussianPrior, ProductLaplacePrior, MixturePrior>;

  Prior(GaussianPrior g) : rep_(std::move(g)) {}
  Prior(ProductLaplacePrior l) : rep_(std::move(l)) {}
  Prior(MixturePrior m) : rep_(std::move(m)) {}

  static Prior gaussian(Vector mean, Matrix cov) {
    return GaussianPrior(std::move(mean), std::move(cov));
  }
  static Prior product_laplace(Vector location, Vector scale) {
    return ProductLaplacePrior(std::move(location), std::move(scale));
  }
  /// Components must themselves be Gaussian or product-Laplace priors.
  static Prior mixture(std::vector<double> weights, const std::vector<Prior>& components) {
    std::vector<MixtureComponent> leaves;
    leaves.reserve(components.size());
    for (const auto& c : components) {
      if (const auto* g = std::get_if<GaussianPrior>(&c.rep_)) {
        leaves.emplace_back(*g);
      } else if (const auto* l = std::get_if<ProductLaplacePrior>(&c.rep_)) {
        leaves.emplace_back(*l);
      } else {
        throw Error(ErrorCode::kInvalidPrior, "components: nested mixtures are not supported");
      }
    }
    return MixturePrior(std::move(weights), std::move(leaves));
  }

  PriorKind kind() const { return static_cast<PriorKind>(rep_.index()); }
  Eigen::Index dim() const {
    return std::visit([](const auto& p) { return p.dim(); }, rep_);
  }
  /// True when the density has a Laplace factor anywhere.
  bool has_laplace() const {
    if (kind() == PriorKind::kProductLaplace) return true;
    if (const auto* m = std::get_if<MixturePrior>(&rep_)) {
      for (const auto& c : m->components()) {
        if (std::holds_alternative<ProductLaplacePrior>(c)) return true;
      }
    }
    return false;
  }

  const Rep& rep() const { return rep_; }

 private:
  Rep rep_;
};

/// Blurred log-density with derivatives at one (y, gamma).
struct BlurredEval {
  double log_density = 0.0;
  Vector score;
  Matrix hessian;
};

/// How much of BlurredEval to fill in.
enum class Derivatives { kNone, kScore, kHessian };

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline void check_point(const Prior& prior, const Vector& v, const char* what) {
  require(v.size() == prior.dim(), ErrorCode::kDimensionMismatch, [&] {
    return std::string(what) + ": expected dimension " + std::to_string(prior.dim()) + ", got " +
           std::to_string(v.size());
  });
  require(v.allFinite(), ErrorCode::kNonFinite,
          [&] { return std::string(what) + ": entries must be finite"; });
}

inline void check_gamma(double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::kInvalidGamma,
          "gamma must be positive and finite");
}

inline BlurredEval blurred_leaf(const GaussianPrior& g, const Vector& y, double gamma,
                                Derivatives order) {
  // y ~ N(gamma mu, U diag(gamma^2 lambda + gamma) U^T)
  const Vector var = (gamma * gamma) * g.spectrum().array() + gamma;
  const Vector a = g.basis().transpose() * (y - gamma * g.mean());
  BlurredEval out;
  out.log_density = -0.5 * (static_cast<double>(g.dim()) * kLog2Pi + var.array().log().sum() +
                            (a.array().square() / var.array()).sum());
  if (order != Derivatives::kNone) {
    out.score = -(g.basis() * (a.array() / var.array()).matrix());
  }
  if (order == Derivatives::kHessian) {
    out.hessian = -(g.basis() * var.cwiseInverse().asDiagonal() * g.basis().transpose());
  }
  return out;
}

inline BlurredEval blurred_leaf(const ProductLaplacePrior& l, const Vector& y, double gamma,
                                Derivatives order) {
  const auto d = l.dim();
  BlurredEval out;
  if (order != Derivatives::kNone) out.score.resize(d);
  if (order == Derivatives::kHessian) out.hessian = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    // gamma * x_i ~ Laplace(gamma mu_i, gamma b_i), convolved with N(0, gamma)
    const auto c = special::laplace_gauss_1d(y[i] - gamma * l.location()[i],
                                             gamma * l.scale()[i], gamma);
    out.log_density += c.log_density;
    if (order != Derivatives::kNone) out.score[i] = c.d1;
    if (order == Derivatives::kHessian) out.hessian(i, i) = c.d2;
  }
  return out;
}

inline BlurredEval blurred_leaf(const MixtureComponent& c, const Vector& y, double gamma,
                                Derivatives order) {
  return std::visit([&](const auto& leaf) { return blurred_leaf(leaf, y, gamma, order); }, c);
}

/// Combines per-component evaluations with responsibilities r_k:
///   score = sum r_k s_k,
///   hess  = sum r_k (H_k + (s_k - score)(s_k - score)^T).
inline BlurredEval combine_mixture(const std::vector<double>& log_weights,
                                   const std::vector<BlurredEval>& parts, Derivatives order,
                                   Eigen::Index d) {
  std::vector<double> joint(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) joint[k] = log_weights[k] + parts[k].log_density;
  BlurredEval out;
  out.log_density = special::logsumexp(joint);
  if (order == Derivatives::kNone) return out;
  std::vector<double> resp(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) resp[k] = std::exp(joint[k] - out.log_density);
  out.score = Vector::Zero(d);
  for (std::size_t k = 0; k < parts.size(); ++k) out.score += resp[k] * parts[k].score;
  if (order == Derivatives::kHessian) {
    out.hessian = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Vector dev = parts[k].score - out.score;
      out.hessian += resp[k] * (parts[k].hessian + dev * dev.transpose());
    }
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  }
  return out;
}

inline void check_finite(const BlurredEval& e, Derivatives order) {
  bool ok = std::isfinite(e.log_density);
  if (order != Derivatives::kNone) ok = ok && e.score.allFinite();
  if (order == Derivatives::kHessian) ok = ok && e.hessian.allFinite();
  require(ok, ErrorCode::kNonFinite, "blurred density evaluation overflowed");
}

}  // namespace detail

/// log p_{y_gamma}(y) and, on request, its gradient and Hessian in y.
inline BlurredEval blurred_eval(const Prior& prior, const Vector& y, double gamma,
                                Derivatives order = Derivatives::kHessian) {
  detail::check_gamma(gamma);
  detail::check_point(prior, y, "y");
  BlurredEval out = std::visit(
      [&](const auto& p) -> BlurredEval {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixturePrior>) {
          std::vector<BlurredEval> parts;
          parts.reserve(p.components().size());
          for (const auto& c : p.components()) {
            parts.push_back(detail::blurred_leaf(c, y, gamma, order));
          }
          return detail::combine_mixture(p.log_weights(), parts, order, p.dim());
        } else {
          return detail::blurred_leaf(p, y, gamma, order);
        }
      },
      prior.rep());
  detail::check_finite(out, order);
  return out;
}

inline double blurred_log_density(const Prior& prior, const Vector& y, double gamma) {
  return blurred_eval(prior, y, gamma, Derivatives::kNone).log_density;
}

inline Vector blurred_score(const Prior& prior, const Vector& y, double gamma) {
  return blurred_eval(prior, y, gamma, Derivatives::kScore).score;
}

inline Matrix blurred_hessian(const Prior& prior, const Vector& y, double gamma) {
  return blurred_eval(prior, y, gamma, Derivatives::kHessian).hessian;
}

/// Posterior mean E[x | y_gamma = y] = y / gamma + score (Tweedie).
inline Vector denoise(const Prior& prior, const Vector& y, double gamma) {
  detail::check_gamma(gamma);
  return y / gamma + blurred_score(prior, y, gamma);
}

inline constexpr double kPsdClampTolerance = 1e-8;

/// Cov[x | y_gamma = y] = Hessian + I / gamma, symmetrized. Eigenvalues in
/// [-1e-8, 0) are clamped to zero; anything more negative is reported.
inline Matrix posterior_cov(const Prior& prior, const Vector& y, double gamma) {
  detail::check_gamma(gamma);
  Matrix cov = blurred_hessian(prior, y, gamma);
  cov.diagonal().array() += 1.0 / gamma;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double smallest = eig.eigenvalues().minCoeff();
  detail::require(smallest >= -kPsdClampTolerance, ErrorCode::kNotPSD,
                  [&] { return "posterior covariance has eigenvalue " + std::to_string(smallest); });
  if (smallest < 0.0) {
    const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  }
  return cov;
}

namespace detail {

struct CleanEval {
  double log_density = 0.0;
  Vector score;
  Matrix hessian;
};

inline CleanEval clean_leaf(const GaussianPrior& g, const Vector& x, Derivatives order) {
  const Vector a = g.basis().transpose() * (x - g.mean());
  CleanEval out;
  out.log_density = -0.5 * (static_cast<double>(g.dim()) * kLog2Pi +
                            g.spectrum().array().log().sum() +
                            (a.array().square() / g.spectrum().array()).sum());
  if (order != Derivatives::kNone) {
    out.score = -(g.basis() * (a.array() / g.spectrum().array()).matrix());
  }
  if (order == Derivatives::kHessian) {
    out.hessian = -(g.basis() * g.spectrum().cwiseInverse().asDiagonal() * g.basis().transpose());
  }
  return out;
}

inline CleanEval clean_leaf(const ProductLaplacePrior& l, const Vector& x, Derivatives order) {
  require(order != Derivatives::kHessian, ErrorCode::kUnsupported,
          "clean Hessian of a Laplace density is not a function");
  CleanEval out;
  const Vector dev = x - l.location();
  out.log_density = -((2.0 * l.scale()).array().log().sum()) - (dev.array().abs() / l.scale().array()).sum();
  if (order == Derivatives::kScore) {
    out.score.resize(l.dim());
    for (Eigen::Index i = 0; i < l.dim(); ++i) {
      require(dev[i] != 0.0, ErrorCode::kAtKink,
              [&] { return "coordinate " + std::to_string(i) + " sits at the Laplace location"; });
      out.score[i] = dev[i] > 0.0 ? -1.0 / l.scale()[i] : 1.0 / l.scale()[i];
    }
  }
  return out;
}

inline CleanEval clean_eval(const Prior& prior, const Vector& x, Derivatives order) {
  check_point(prior, x, "x");
  return std::visit(
      [&](const auto& p) -> CleanEval {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixturePrior>) {
          std::vector<BlurredEval> parts;
          for (const auto& c : p.components()) {
            auto leaf = std::visit([&](const auto& l) { return clean_leaf(l, x, order); }, c);
            parts.push_back({leaf.log_density, std::move(leaf.score), std::move(leaf.hessian)});
          }
          auto m = combine_mixture(p.log_weights(), parts, order, p.dim());
          return {m.log_density, std::move(m.score), std::move(m.hessian)};
        } else {
          return clean_leaf(p, x, order);
        }
      },
      prior.rep());
}

}  // namespace detail

/// Unblurred log p_x(x).
inline double log_density(const Prior& prior, const Vector& x) {
  return detail::clean_eval(prior, x, Derivatives::kNone).log_density;
}

/// Gradient of log p_x. Throws AtKink when a Laplace coordinate equals its location.
inline Vector clean_score(const Prior& prior, const Vector& x) {
  return detail::clean_eval(prior, x, Derivatives::kScore).score;
}

/// Hessian of log p_x; only defined for Gaussian priors and Gaussian mixtures.
inline Matrix clean_hessian(const Prior& prior, const Vector& x) {
  detail::require(!prior.has_laplace(), ErrorCode::kUnsupported,
                  "clean Hessian requires a Gaussian or Gaussian-mixture prior");
  return detail::clean_eval(prior, x, Derivatives::kHessian).hessian;
}

/// Draws with the mixture component index of each row (0 for non-mixtures).
struct LabeledSample {
  Matrix points;
  std::vector<int> labels;
};

namespace detail {

inline Vector draw_leaf(const GaussianPrior& g, std::mt19937_64& rng,
                        std::normal_distribution<double>& normal) {
  Vector z(g.dim());
  for (auto& v : z) v = normal(rng);
  return g.mean() + g.basis() * (g.spectrum().cwiseSqrt().asDiagonal() * z);
}

inline Vector draw_leaf(const ProductLaplacePrior& l, std::mt19937_64& rng,
                        std::normal_distribution<double>&) {
  std::exponential_distribution<double> expo(1.0);
  Vector x(l.dim());
  for (Eigen::Index i = 0; i < l.dim(); ++i) {
    const double e1 = expo(rng);
    const double e2 = expo(rng);
    x[i] = l.location()[i] + l.scale()[i] * (e1 - e2);
  }
  return x;
}

}  // namespace detail

inline LabeledSample sample_labeled(const Prior& prior, std::size_t n, std::uint64_t seed) {
  detail::require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledSample out{Matrix(static_cast<Eigen::Index>(n), prior.dim()), std::vector<int>(n, 0)};
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, MixturePrior>) {
            std::discrete_distribution<int> pick(p.weights().begin(), p.weights().end());
            const int k = pick(rng);
            out.labels[r] = k;
            out.points.row(row) = std::visit(
                [&](const auto& leaf) { return detail::draw_leaf(leaf, rng, normal); },
                p.components()[static_cast<std::size_t>(k)]).transpose();
          } else {
            out.points.row(row) = detail::draw_leaf(p, rng, normal).transpose();
          }
        },
        prior.rep());
  }
  return out;
}

/// n i.i.d. draws as rows of an n x d matrix.
inline Matrix sample(const Prior& prior, std::size_t n, std::uint64_t seed) {
  return sample_labeled(prior, n, seed).points;
}

namespace detail {

inline bool is_signed_permutation(const Matrix& a) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    int nonzero = 0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (a(r, c) == 0.0) continue;
      if (std::abs(a(r, c)) != 1.0) return false;
      ++nonzero;
    }
    if (nonzero != 1) return false;
  }
  return true;
}

inline MixtureComponent map_leaf(const GaussianPrior& g, const Matrix& a, const Vector& b) {
  Matrix cov = a * g.cov() * a.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return GaussianPrior(a * g.mean() + b, std::move(cov));
}

inline MixtureComponent map_leaf(const ProductLaplacePrior& l, const Matrix& a, const Vector& b) {
  require(is_signed_permutation(a), ErrorCode::kUnsupported,
          "a product-Laplace prior is only closed under signed permutations");
  return ProductLaplacePrior(a * l.location() + b, a.cwiseAbs() * l.scale());
}

}  // namespace detail

/// Law of A x + b for x ~ prior, with A orthogonal.
inline Prior apply_isometry(const Prior& prior, const Matrix& a, const Vector& b) {
  const auto d = prior.dim();
  detail::require(a.rows() == d && a.cols() == d && b.size() == d, ErrorCode::kDimensionMismatch,
                  "isometry dimensions do not match the prior");
  detail::require((a.transpose() * a - Matrix::Identity(d, d)).norm() <= 1e-10,
                  ErrorCode::kInvalidArgument, "isometry matrix is not orthogonal");
  const auto to_prior = [](MixtureComponent&& c) {
    return std::visit([](auto&& leaf) { return Prior(std::move(leaf)); }, std::move(c));
  };
  return std::visit(
      [&](const auto& p) -> Prior {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixturePrior>) {
          std::vector<MixtureComponent> leaves;
          for (const auto& c : p.components()) {
            leaves.push_back(std::visit([&](const auto& l) { return detail::map_leaf(l, a, b); }, c));
          }
          return MixturePrior(p.weights(), std::move(leaves));
        } else {
          return to_prior(detail::map_leaf(p, a, b));
        }
      },
      prior.rep());
}

}  // namespace iem

#endif  // IEM_PRIOR_HPP_
