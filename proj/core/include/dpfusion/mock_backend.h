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

#ifndef DPFUSION_MOCK_BACKEND_H_
#define DPFUSION_MOCK_BACKEND_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dpfusion/backend.h"

namespace dpfusion {

enum class MockMode {
  // Every context yields the uniform distribution.
  kUniform,
  // Exact-bytes lookup into a script, falling back to a fixed smoothed
  // unigram distribution for unscripted contexts.
  kTable,
  // Pseudo-random logits keyed by a hash of the last `window` bytes of the
  // context (the whole context when window is 0).
  kNgram,
};

struct MockConfig {
  MockMode mode = MockMode::kNgram;
  // Token strings; the entry at eos_token is the terminator. Defaults to
  // single characters plus "<eos>".
  std::vector<std::string> vocab;
  int eos_token = -1;  // -1: last vocabulary entry
  std::uint64_t seed = 0;
  std::size_t window = 0;
  // Standard deviation of hashed logits in ngram mode.
  double logit_scale = 2.0;
  // Added to the terminator's logit in ngram mode; keeps runs long.
  double eos_bias = -4.0;
  std::map<std::string, std::vector<double>> script;
};

std::vector<std::string> DefaultMockVocabulary();

// Parses {"mode": "uniform"|"table"|"ngram", "vocab": [str], "eos": int,
// "seed": int, "window": int, "scale": float, "eos_bias": float,
// "script": {context: [prob]}}. Missing keys keep MockConfig defaults.
MockConfig ParseMockConfig(std::string_view json);

class MockModel final : public DistributionProvider {
 public:
  explicit MockModel(MockConfig config = {});

  std::size_t vocab_size() const override { return vocab_.size(); }
  int eos_token() const override { return eos_token_; }
  BackendCapabilities capabilities() const override {
    return {.next_dist = true,
            .teacher_force_score = true,
            .batched = true,
            .logits = true};
  }

  Dist NextDistribution(std::string_view context,
                        double temperature) const override;
  LogitVector NextLogits(std::string_view context) const override;
  std::vector<double> ScoreContinuation(
      std::string_view context, std::string_view continuation) const override;
  std::string TokenText(int token) const override;

  // Greedy longest-match tokenization over the vocabulary. Throws
  // kInvalidInput on bytes no token covers.
  std::vector<int> Tokenize(std::string_view text) const;

  const MockConfig& config() const { return config_; }

 private:
  LogitVector HashedLogits(std::string_view context) const;

  MockConfig config_;
  std::vector<std::string> vocab_;
  int eos_token_;
  std::unordered_map<std::string, Dist> script_;
  Dist fallback_;
  // Candidate tokens by leading byte, longest first.
  std::vector<std::vector<int>> by_first_byte_;
};

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t Fnv1a64(std::string_view bytes);

}  // namespace dpfusion

#endif  // DPFUSION_MOCK_BACKEND_H_
