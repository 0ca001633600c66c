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

#ifndef IEM_SPECIAL_HPP_
#define IEM_SPECIAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace iem::special {

/// log(exp(z^2) * erfc(z)), accurate for all finite z.
///
/// For z >= 10 the asymptotic expansion
///   erfcx(z) ~ 1 / (z sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2 z^2)^k
/// is summed until the terms stop shrinking; at z = 10 the first neglected
/// term is below 1e-20 relative.
inline double log_erfcx(double z) {
  if (z < 10.0) return std::log(std::erfc(z)) + z * z;
  const double inv_two_z2 = 1.0 / (2.0 * z * z);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 40; ++k) {
    const double next = -term * (2.0 * k - 1.0) * inv_two_z2;
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return std::log(sum) - std::log(z) - 0.5 * std::log(std::numbers::pi);
}

inline double logsumexp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double logsumexp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

/// Log-density of a Laplace(0, B) variable plus independent N(0, s2) noise,
/// evaluated at offset u from the Laplace location, with its first two
/// derivatives in u.
struct LaplaceGauss1D {
  double log_density;
  double d1;
  double d2;
};

// The convolution is
//   p(u) = 1/(4B) [A1(u) + A2(u)],
//   A1 = exp(s2/(2B^2) - u/B) erfc((s2/B - u) / sqrt(2 s2)),
//   A2 = exp(s2/(2B^2) + u/B) erfc((s2/B + u) / sqrt(2 s2)).
// When the erfc argument is nonnegative the exponent is folded into erfcx,
// which leaves exp(-u^2/(2 s2)) erfcx(z) and never overflows. Differentiating,
// the Gaussian kernel terms cancel in p' and
//   p'/p  = (A2 - A1) / (B (A1 + A2)),
//   p''/p = 1/B^2 - 2 phi(u) / (B (A1 + A2)),  phi = sqrt(2/pi)/s exp(-u^2/(2 s2)).
// With r_i = A_i / (A1 + A2), 1/B^2 - (p'/p)^2 = 4 r1 r2 / B^2.
inline LaplaceGauss1D laplace_gauss_1d(double u, double scale, double noise_var) {
  const double s = std::sqrt(noise_var);
  const double inv_sqrt2s = 1.0 / (std::numbers::sqrt2 * s);
  const double ratio = noise_var / scale;
  const double gauss_exponent = -u * u / (2.0 * noise_var);
  const double shift_exponent = noise_var / (2.0 * scale * scale);

  const auto log_branch = [&](double z, double signed_u) {
    if (z >= 0.0) return log_erfcx(z) + gauss_exponent;
    return std::log(std::erfc(z)) + shift_exponent + signed_u / scale;
  };
  const double t1 = log_branch((ratio - u) * inv_sqrt2s, -u);
  const double t2 = log_branch((ratio + u) * inv_sqrt2s, u);
  const double lse = logsumexp(t1, t2);

  const double r1 = std::exp(t1 - lse);
  const double r2 = std::exp(t2 - lse);
  const double d1 = (r2 - r1) / scale;

  const double log_phi = 0.5 * std::log(2.0 / std::numbers::pi) - std::log(s) + gauss_exponent;
  const double q = std::exp(log_phi - lse);
  const double d2 = 4.0 * r1 * r2 / (scale * scale) - 2.0 * q / scale;

  return {lse - std::log(4.0 * scale), d1, d2};
}

}  // namespace iem::special

#endif  // IEM_SPECIAL_HPP_
