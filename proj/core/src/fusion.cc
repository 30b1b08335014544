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

#include "dpfusion/fusion.h"

#include <algorithm>
#include <cmath>
#include <future>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

bool IsBackendFailure(ErrorCode code) {
  return code == ErrorCode::kTransport ||
         code == ErrorCode::kMalformedResponse ||
         code == ErrorCode::kContextTooLong;
}

}  // namespace

double TokenSampler::NextUniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int TokenSampler::Sample(const Dist& dist) {
  return InverseCdf(dist, NextUniform());
}

int InverseCdf(const Dist& dist, double u) {
  const auto probs = dist.probs();
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = u * total;
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = static_cast<int>(i);
    if (target < cumulative) return last_positive;
  }
  return last_positive;
}

FusedStep FuseStep(const Dist& p_pub, std::span<const Dist> p_priv_list,
                   std::span<const double> bounds, RenyiOrder order,
                   double tolerance) {
  if (p_priv_list.empty()) {
    throw Error(ErrorCode::kDegenerateDocument,
                "no private groups; sample from the public distribution");
  }
  if (p_priv_list.size() != bounds.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "one bound per private distribution required");
  }
  const std::size_t m = p_priv_list.size();
  FusedStep step;
  step.outcomes.reserve(m);
  std::vector<double> sum(p_pub.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Dist& p_priv = p_priv_list[i];
    if (p_priv.size() != p_pub.size()) {
      throw Error(ErrorCode::kInvalidInput, "vocabulary size mismatch");
    }
    MollificationOutcome outcome =
        FindMaxLambda(p_priv, p_pub, order, bounds[i], tolerance);
    // Rounding can leave the recomputed divergence a hair above the bound;
    // step back once, then fall back to the public distribution.
    if (outcome.achieved_divergence > bounds[i]) {
      outcome.lambda = std::max(0.0, outcome.lambda - tolerance);
      outcome.achieved_divergence =
          SymmetricRenyi(Mix(outcome.lambda, p_priv, p_pub), p_pub, order);
      outcome.saturated = true;
      if (outcome.achieved_divergence > bounds[i]) {
        outcome.lambda = 0.0;
        outcome.achieved_divergence = 0.0;
      }
    }
    outcome.achieved_divergence =
        std::min(outcome.achieved_divergence, bounds[i]);
    const Dist mixed = Mix(outcome.lambda, p_priv, p_pub);
    for (std::size_t v = 0; v < sum.size(); ++v) sum[v] += mixed[v];
    step.outcomes.push_back(outcome);
  }
  for (double& v : sum) v /= static_cast<double>(m);
  step.p_final = Dist::FromProbabilities(std::move(sum));
  return step;
}

std::vector<GroupBudget> ResolveBudgets(const AnnotatedDocument& doc,
                                        const FusionConfig& config) {
  std::vector<GroupBudget> budgets;
  for (const PrivacyGroup& group : doc.groups()) {
    const auto it = config.per_group_budgets.find(group.id);
    const double beta =
        it == config.per_group_budgets.end() ? group.beta : it->second;
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      throw Error(ErrorCode::kInvalidInput,
                  "budget for group " + std::to_string(group.id) +
                      " must be finite and >= 0");
    }
    budgets.push_back({group.id, beta, config.order.value() * beta});
  }
  return budgets;
}

std::vector<Dist> QueryContexts(const DistributionProvider& backend,
                                std::span<const std::string> contexts,
                                double temperature) {
  std::vector<Dist> dists;
  if (backend.capabilities().batched || contexts.size() == 1) {
    dists = backend.NextDistributionBatch(contexts, temperature);
  } else {
    std::vector<std::future<Dist>> pending;
    pending.reserve(contexts.size());
    for (const std::string& context : contexts) {
      pending.push_back(std::async(std::launch::async, [&backend, &context, temperature] {
        return backend.NextDistribution(context, temperature);
      }));
    }
    for (auto& f : pending) dists.push_back(f.get());
  }
  if (dists.size() != contexts.size()) {
    throw Error(ErrorCode::kMalformedResponse, "batch size mismatch");
  }
  for (Dist& d : dists) {
    if (d.size() != backend.vocab_size()) {
      throw Error(ErrorCode::kMalformedResponse,
                  "distribution length differs from vocabulary size");
    }
    d = ApplyProbabilityFloor(d);
  }
  return dists;
}

FusionTranscript SampleTranscript(const DistributionProvider& backend,
                                  int max_tokens, std::uint64_t seed,
                                  const NextStepFn& next) {
  if (max_tokens < 1) {
    throw Error(ErrorCode::kInvalidInput, "max_tokens must be >= 1");
  }
  FusionTranscript transcript;
  TokenSampler sampler(seed);
  const int eos = backend.eos_token();
  try {
    for (int t = 0; t < max_tokens; ++t) {
      StepRecord record;
      record.step_index = t;
      const Dist dist = next(transcript.output_text, record);
      record.chosen_token = sampler.Sample(dist);
      transcript.output_tokens.push_back(record.chosen_token);
      if (record.chosen_token == eos) {
        transcript.steps.push_back(std::move(record));
        break;
      }
      record.text_piece = backend.TokenText(record.chosen_token);
      transcript.output_text += record.text_piece;
      transcript.steps.push_back(std::move(record));
    }
  } catch (const Error& e) {
    if (!IsBackendFailure(e.code())) throw;
    transcript.valid = false;
    transcript.error = e.what();
    // Keep |steps| == |output_tokens| on the partial transcript.
    transcript.output_tokens.resize(transcript.steps.size());
  }
  return transcript;
}

FusionEngine::FusionEngine(const DistributionProvider& backend,
                           PromptBundle bundle, FusionConfig config)
    : backend_(backend), bundle_(std::move(bundle)), config_(config) {
  if (config_.max_tokens < 1) {
    throw Error(ErrorCode::kInvalidInput, "max_tokens must be >= 1");
  }
  if (!(config_.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "temperature must be > 0");
  }
}

std::vector<std::string> FusionEngine::ViewPrompts(
    const AnnotatedDocument& doc) const {
  const Partition partition = PartitionDocument(doc, bundle_.placeholder);
  std::vector<std::string> prompts;
  prompts.reserve(partition.group_views.size() + 1);
  prompts.push_back(AssemblePrompt(partition.public_view, bundle_));
  for (const ContextView& view : partition.group_views) {
    prompts.push_back(AssemblePrompt(view, bundle_));
  }
  return prompts;
}

std::vector<Dist> FusionEngine::Query(std::span<const std::string> prompts,
                                      std::string_view generated) const {
  std::vector<std::string> contexts;
  contexts.reserve(prompts.size());
  for (const std::string& prompt : prompts) {
    contexts.push_back(prompt + std::string(generated));
  }
  return QueryContexts(backend_, contexts, config_.temperature);
}

StepDistribution FusionEngine::Fuse(
    std::vector<Dist> dists, std::span<const GroupBudget> budgets) const {
  StepDistribution step;
  step.p_pub = std::move(dists.front());
  step.p_priv.assign(std::make_move_iterator(dists.begin() + 1),
                     std::make_move_iterator(dists.end()));
  if (step.p_priv.empty()) {
    step.p_final = step.p_pub;
    return step;
  }
  std::vector<double> bounds;
  for (const GroupBudget& b : budgets) bounds.push_back(b.bound);
  FusedStep fused = FuseStep(step.p_pub, step.p_priv, bounds, config_.order,
                             config_.bisection_tolerance);
  step.p_final = std::move(fused.p_final);
  step.outcomes = std::move(fused.outcomes);
  return step;
}

StepDistribution FusionEngine::ComputeStep(const AnnotatedDocument& doc,
                                           std::string_view generated) const {
  const auto budgets = ResolveBudgets(doc, config_);
  return Fuse(Query(ViewPrompts(doc), generated), budgets);
}

FusionTranscript FusionEngine::Generate(const AnnotatedDocument& doc) const {
  const auto budgets = ResolveBudgets(doc, config_);
  const auto prompts = ViewPrompts(doc);
  FusionTranscript transcript = SampleTranscript(
      backend_, config_.max_tokens, config_.rng_seed,
      [&](std::string_view generated, StepRecord& record) {
        StepDistribution step = Fuse(Query(prompts, generated), budgets);
        for (std::size_t i = 0; i < step.outcomes.size(); ++i) {
          record.per_group[budgets[i].id] = step.outcomes[i];
        }
        if (!step.outcomes.empty()) {
          record.fused_divergence =
              SymmetricRenyi(step.p_final, step.p_pub, config_.order);
        }
        return step.p_final;
      });
  RunEcho& echo = transcript.config_echo;
  echo.mode = "dp_fusion";
  echo.doc_id = doc.doc_id();
  echo.max_tokens = config_.max_tokens;
  echo.alpha = config_.order.value();
  echo.temperature = config_.temperature;
  echo.seed = config_.rng_seed;
  echo.tolerance = config_.bisection_tolerance;
  echo.budgets = budgets;
  return transcript;
}

}  // namespace dpfusion
