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

#ifndef DPFUSION_BASELINES_H_
#define DPFUSION_BASELINES_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "dpfusion/backend.h"
#include "dpfusion/dist.h"
#include "dpfusion/document.h"
#include "dpfusion/fusion.h"

namespace dpfusion {

// Interpolation with the uniform distribution over the vocabulary.
struct DpDecodingConfig {
  double lambda_interp = 0.5;  // in [0, 1)
  double temperature = 1.0;
};

// Exponential mechanism over logits clipped to [clip_min, clip_max].
struct DpPromptConfig {
  double clip_min = -2.5;
  double clip_max = 2.5;
  double temperature = 1.0;

  // Symmetric range (-width/2, width/2): width 5 is (-2.5, 2.5).
  static DpPromptConfig FromWidth(double width, double temperature);
  double width() const { return clip_max - clip_min; }
};

// lambda * p + (1 - lambda) / V. Throws kInvalidInput unless
// 0 <= lambda < 1 and V == p.size().
Dist DpDecodingStep(const Dist& p, double lambda_interp,
                    std::size_t vocab_size);

// temperature * log(1 + (V - 1) * lambda / (1 - lambda)).
double DpDecodingEpsilon(double lambda_interp, std::size_t vocab_size,
                         double temperature);

// Clamps each logit into the range, then takes the tempered softmax.
Dist DpPromptStep(const LogitVector& logits, const DpPromptConfig& config);

// 2 * t_max * width / temperature.
double DpPromptEpsilon(const DpPromptConfig& config, int t_max);

enum class BaselineMode { kOriginalDoc, kNerPublic, kDpDecoding, kDpPrompt };

std::string_view BaselineModeName(BaselineMode mode);
BaselineMode ParseBaselineMode(std::string_view name);

struct BaselineConfig {
  BaselineMode mode = BaselineMode::kOriginalDoc;
  int max_tokens = kDefaultMaxTokens;
  // Backend softmax temperature for original_doc, ner_public and
  // dp_decoding (dp_decoding.temperature is only used for its epsilon).
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;
  DpDecodingConfig dp_decoding;
  DpPromptConfig dp_prompt;
};

// Single-context generation with the same sampling loop and transcript
// format as DP-Fusion. original_doc and dp_* render the full document,
// ner_public the public view. The no-DPI modes add the privacy instruction
// to the prompt when the bundle has no extra instruction of its own.
// Per-group records stay empty.
FusionTranscript BaselineGenerate(const DistributionProvider& backend,
                                  const AnnotatedDocument& doc,
                                  const PromptBundle& bundle,
                                  const BaselineConfig& config);

}  // namespace dpfusion

#endif  // DPFUSION_BASELINES_H_
