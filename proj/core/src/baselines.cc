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

#include "dpfusion/baselines.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

void CheckInterpolation(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "interpolation weight must lie in [0, 1), got " +
                    std::to_string(lambda));
  }
}

void CheckClipRange(const DpPromptConfig& config) {
  if (!(config.clip_min <= config.clip_max) ||
      !std::isfinite(config.clip_min) || !std::isfinite(config.clip_max)) {
    throw Error(ErrorCode::kInvalidInput, "clip range must be finite, min <= max");
  }
  if (!(config.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "temperature must be > 0");
  }
}

}  // namespace

DpPromptConfig DpPromptConfig::FromWidth(double width, double temperature) {
  return {-width / 2.0, width / 2.0, temperature};
}

Dist DpDecodingStep(const Dist& p, double lambda_interp,
                    std::size_t vocab_size) {
  CheckInterpolation(lambda_interp);
  if (vocab_size != p.size()) {
    throw Error(ErrorCode::kInvalidInput, "vocabulary size mismatch");
  }
  const double floor = (1.0 - lambda_interp) / static_cast<double>(vocab_size);
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lambda_interp * p[i] + floor;
  }
  return Dist::FromProbabilities(std::move(out));
}

double DpDecodingEpsilon(double lambda_interp, std::size_t vocab_size,
                         double temperature) {
  CheckInterpolation(lambda_interp);
  if (vocab_size == 0 || !(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "vocabulary size and temperature must be positive");
  }
  return temperature *
         std::log1p((static_cast<double>(vocab_size) - 1.0) * lambda_interp /
                    (1.0 - lambda_interp));
}

Dist DpPromptStep(const LogitVector& logits, const DpPromptConfig& config) {
  CheckClipRange(config);
  std::vector<double> clipped(logits.values().begin(), logits.values().end());
  for (double& z : clipped) z = std::clamp(z, config.clip_min, config.clip_max);
  return SoftmaxWithTemperature(LogitVector(std::move(clipped)),
                                config.temperature);
}

double DpPromptEpsilon(const DpPromptConfig& config, int t_max) {
  CheckClipRange(config);
  if (t_max < 1) throw Error(ErrorCode::kInvalidInput, "T_max must be >= 1");
  return 2.0 * t_max * config.width() / config.temperature;
}

std::string_view BaselineModeName(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::kOriginalDoc:
      return "original_doc";
    case BaselineMode::kNerPublic:
      return "ner_public";
    case BaselineMode::kDpDecoding:
      return "dp_decoding";
    case BaselineMode::kDpPrompt:
      return "dp_prompt";
  }
  return "unknown";
}

BaselineMode ParseBaselineMode(std::string_view name) {
  if (name == "original_doc" || name == "original") {
    return BaselineMode::kOriginalDoc;
  }
  if (name == "ner_public") return BaselineMode::kNerPublic;
  if (name == "dp_decoding") return BaselineMode::kDpDecoding;
  if (name == "dp_prompt") return BaselineMode::kDpPrompt;
  throw Error(ErrorCode::kInvalidInput,
              "unknown baseline mode '" + std::string(name) + "'");
}

FusionTranscript BaselineGenerate(const DistributionProvider& backend,
                                  const AnnotatedDocument& doc,
                                  const PromptBundle& bundle,
                                  const BaselineConfig& config) {
  PromptBundle effective = bundle;
  std::set<int> revealed;
  for (const PrivacyGroup& g : doc.groups()) revealed.insert(g.id);
  RunEcho echo;
  echo.mode = std::string(BaselineModeName(config.mode));
  echo.doc_id = doc.doc_id();
  echo.max_tokens = config.max_tokens;
  echo.temperature = config.temperature;
  echo.seed = config.rng_seed;

  switch (config.mode) {
    case BaselineMode::kNerPublic:
      revealed.clear();
      [[fallthrough]];
    case BaselineMode::kOriginalDoc:
      if (effective.extra_instruction.empty()) {
        effective.extra_instruction = std::string(kPrivacyInstruction);
      }
      break;
    case BaselineMode::kDpDecoding:
      CheckInterpolation(config.dp_decoding.lambda_interp);
      echo.params["lambda_interp"] = config.dp_decoding.lambda_interp;
      echo.params["epsilon"] =
          DpDecodingEpsilon(config.dp_decoding.lambda_interp,
                            backend.vocab_size(),
                            config.dp_decoding.temperature);
      break;
    case BaselineMode::kDpPrompt:
      if (!backend.capabilities().logits) {
        throw Error(ErrorCode::kUnsupported,
                    "dp_prompt needs a backend that exposes logits");
      }
      echo.temperature = config.dp_prompt.temperature;
      echo.params["clip_min"] = config.dp_prompt.clip_min;
      echo.params["clip_max"] = config.dp_prompt.clip_max;
      echo.params["epsilon"] =
          DpPromptEpsilon(config.dp_prompt, config.max_tokens);
      break;
  }

  const std::string prompt = AssemblePrompt(
      RenderView(doc, revealed, effective.placeholder), effective);
  const std::size_t vocab = backend.vocab_size();
  FusionTranscript transcript = SampleTranscript(
      backend, config.max_tokens, config.rng_seed,
      [&](std::string_view generated, StepRecord&) -> Dist {
        const std::string context = prompt + std::string(generated);
        switch (config.mode) {
          case BaselineMode::kOriginalDoc:
          case BaselineMode::kNerPublic:
            return backend.NextDistribution(context, config.temperature);
          case BaselineMode::kDpDecoding:
            return DpDecodingStep(
                backend.NextDistribution(context, config.temperature),
                config.dp_decoding.lambda_interp, vocab);
          case BaselineMode::kDpPrompt:
            return DpPromptStep(backend.NextLogits(context), config.dp_prompt);
        }
        throw Error(ErrorCode::kInvalidInput, "bad baseline mode");
      });
  transcript.config_echo = std::move(echo);
  return transcript;
}

}  // namespace dpfusion
