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

#ifndef DPFUSION_BACKEND_H_
#define DPFUSION_BACKEND_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpfusion/dist.h"

namespace dpfusion {

struct BackendCapabilities {
  bool next_dist = true;
  bool teacher_force_score = false;
  bool batched = false;
  // Raw pre-softmax scores, needed by the logit-clipping baseline.
  bool logits = false;
};

// Source of next-token distributions. The provider owns tokenization:
// contexts go in as text, token ids come back, and TokenText maps an id to
// the text it contributes.
//
// Implementations must be deterministic per (context, temperature), keep
// vocab_size fixed, and tolerate concurrent calls.
class DistributionProvider {
 public:
  virtual ~DistributionProvider() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual int eos_token() const = 0;
  virtual BackendCapabilities capabilities() const = 0;

  virtual Dist NextDistribution(std::string_view context,
                                double temperature) const = 0;

  // Element-wise NextDistribution, order preserved. Any failure fails the
  // whole batch.
  virtual std::vector<Dist> NextDistributionBatch(
      std::span<const std::string> contexts, double temperature) const;

  // Throws kUnsupported unless capabilities().logits.
  virtual LogitVector NextLogits(std::string_view context) const;

  // Log-probability of each continuation token under teacher forcing.
  // Throws kUnsupported unless capabilities().teacher_force_score.
  virtual std::vector<double> ScoreContinuation(
      std::string_view context, std::string_view continuation) const;

  virtual std::string TokenText(int token) const = 0;
};

}  // namespace dpfusion

#endif  // DPFUSION_BACKEND_H_
