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

#ifndef IEM_PRESETS_HPP_
#define IEM_PRESETS_HPP_

// Two-dimensional reference priors used throughout the tests, the validation
// suites and the bundled prior files.

#include "iem/prior.hpp"

namespace iem::presets {

/// Laplace(0, 4) x Laplace(1, 2).
inline Prior laplace_product() { return Prior::product_laplace(Vector{{0.0, 1.0}}, Vector{{4.0, 2.0}}); }

/// N((0, 1), diag(1, 0.1)).
inline Prior anisotropic_gaussian() {
  return Prior::gaussian(Vector{{0.0, 1.0}}, Matrix{{1.0, 0.0}, {0.0, 0.1}});
}

/// 0.3 N((0, 1), diag(1, 0.1)) + 0.7 N((1, -1), [[1, 0.5], [0.5, 0.4]]).
inline Prior skewed_mixture() {
  return Prior::mixture({0.3, 0.7},
                        {anisotropic_gaussian(),
                         Prior::gaussian(Vector{{1.0, -1.0}}, Matrix{{1.0, 0.5}, {0.5, 0.4}})});
}

/// Two equally weighted, strongly correlated modes at (0, 1) and (0, -1).
inline Prior correlated_modes() {
  const Matrix cov{{1.0, 0.95}, {0.95, 1.0}};
  return Prior::mixture({0.5, 0.5}, {Prior::gaussian(Vector{{0.0, 1.0}}, cov),
                                     Prior::gaussian(Vector{{0.0, -1.0}}, cov)});
}

}  // namespace iem::presets

#endif  // IEM_PRESETS_HPP_
