// Copyright 2026 The DP-Fusion Engine Authors
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

#ifndef DPFUSION_MOLLIFIER_H_
#define DPFUSION_MOLLIFIER_H_

#include "dpfusion/dist.h"

namespace dpfusion {

inline constexpr double kDefaultBisectionTolerance = 1e-4;

struct MollificationOutcome {
  double lambda = 0.0;
  // Symmetric divergence of the released mixture from p_pub, evaluated at
  // `lambda` itself.
  double achieved_divergence = 0.0;
  // True iff the bound was active, i.e. lambda < 1.
  bool saturated = false;
};

// Largest lambda (to within `tolerance`) with
//   SymmetricRenyi(Mix(lambda, p_priv, p_pub), p_pub, order) <= budget_bound.
//
// When lambda = 1 already meets the bound the search is skipped and exactly 1
// is returned. Otherwise bisection keeps [low, high] with low feasible and
// high infeasible and returns low once high - low <= tolerance. Relies on the
// divergence being non-decreasing in lambda.
//
// budget_bound is alpha * beta. Negative bounds or tolerances throw
// kInvalidInput.
MollificationOutcome FindMaxLambda(
    const Dist& p_priv, const Dist& p_pub, RenyiOrder order,
    double budget_bound, double tolerance = kDefaultBisectionTolerance);

}  // namespace dpfusion

#endif  // DPFUSION_MOLLIFIER_H_
