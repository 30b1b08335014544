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

#include "dpfusion/mollifier.h"

#include <cmath>
#include <string>

#include "dpfusion/error.h"

namespace dpfusion {

MollificationOutcome FindMaxLambda(const Dist& p_priv, const Dist& p_pub,
                                   RenyiOrder order, double budget_bound,
                                   double tolerance) {
  if (!(budget_bound >= 0.0) || std::isnan(budget_bound)) {
    throw Error(ErrorCode::kInvalidInput,
                "budget bound must be >= 0, got " +
                    std::to_string(budget_bound));
  }
  if (!(tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "tolerance must be > 0");
  }
  const auto divergence_at = [&](double lambda) {
    return SymmetricRenyi(Mix(lambda, p_priv, p_pub), p_pub, order);
  };

  const double full = divergence_at(1.0);
  if (full <= budget_bound) return {1.0, full, false};

  double low = 0.0;
  double high = 1.0;
  while (high - low > tolerance) {
    const double mid = 0.5 * (low + high);
    if (divergence_at(mid) <= budget_bound) {
      low = mid;
    } else {
      high = mid;
    }
  }
  return {low, divergence_at(low), true};
}

}  // namespace dpfusion
