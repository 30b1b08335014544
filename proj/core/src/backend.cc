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

#include "dpfusion/backend.h"

#include "dpfusion/error.h"

namespace dpfusion {

std::vector<Dist> DistributionProvider::NextDistributionBatch(
    std::span<const std::string> contexts, double temperature) const {
  if (contexts.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty batch");
  }
  std::vector<Dist> out;
  out.reserve(contexts.size());
  for (const std::string& context : contexts) {
    out.push_back(NextDistribution(context, temperature));
  }
  return out;
}

LogitVector DistributionProvider::NextLogits(std::string_view) const {
  throw Error(ErrorCode::kUnsupported, "backend does not expose logits");
}

std::vector<double> DistributionProvider::ScoreContinuation(
    std::string_view, std::string_view) const {
  throw Error(ErrorCode::kUnsupported,
              "backend does not support teacher-forced scoring");
}

}  // namespace dpfusion
