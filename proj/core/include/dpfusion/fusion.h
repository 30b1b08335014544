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

#ifndef DPFUSION_FUSION_H_
#define DPFUSION_FUSION_H_

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpfusion/backend.h"
#include "dpfusion/dist.h"
#include "dpfusion/document.h"
#include "dpfusion/mollifier.h"

namespace dpfusion {

inline constexpr int kDefaultMaxTokens = 900;

struct FusionConfig {
  int max_tokens = kDefaultMaxTokens;
  RenyiOrder order;
  // Applied by the backend's softmax only; p_final is sampled as is.
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;
  // beta_i overrides keyed by group id. Groups without an entry use the
  // document's own budget. Zero is allowed and forces the public
  // distribution.
  std::map<int, double> per_group_budgets;
  double bisection_tolerance = kDefaultBisectionTolerance;
};

struct StepRecord {
  int step_index = 0;
  int chosen_token = 0;
  std::string text_piece;
  std::map<int, MollificationOutcome> per_group;
  // Diagnostic only: SymmetricRenyi(p_final, p_pub). Zero without groups.
  double fused_divergence = 0.0;
};

struct GroupBudget {
  int id = 0;
  double beta = 0.0;
  // alpha * beta, the per-step divergence bound.
  double bound = 0.0;
};

// Everything needed to reproduce and audit one run.
struct RunEcho {
  std::string mode = "dp_fusion";
  std::string doc_id;
  int max_tokens = kDefaultMaxTokens;
  double alpha = 2.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  double tolerance = kDefaultBisectionTolerance;
  std::vector<GroupBudget> budgets;
  // Mode-specific knobs (lambda_interp, clip_min, ...).
  std::map<std::string, double> params;
};

struct FusionTranscript {
  std::vector<int> output_tokens;
  std::string output_text;
  std::vector<StepRecord> steps;
  RunEcho config_echo;
  // False when the backend failed mid-run; such transcripts are partial and
  // must not be released.
  bool valid = true;
  std::string error;
};

// Inverse-CDF sampling from one seeded 64-bit stream.
class TokenSampler {
 public:
  explicit TokenSampler(std::uint64_t seed) : engine_(seed) {}

  int Sample(const Dist& dist);
  // Uniform on [0, 1) from the top 53 bits of one draw.
  double NextUniform();

 private:
  std::mt19937_64 engine_;
};

// Inverse CDF of `dist` at u in [0, 1).
int InverseCdf(const Dist& dist, double u);

struct FusedStep {
  Dist p_final;
  std::vector<MollificationOutcome> outcomes;
};

// Mollifies each private distribution toward p_pub under its bound and
// averages the mixtures. Throws kDegenerateDocument when p_priv_list is
// empty.
FusedStep FuseStep(const Dist& p_pub, std::span<const Dist> p_priv_list,
                   std::span<const double> bounds, RenyiOrder order,
                   double tolerance = kDefaultBisectionTolerance);

// Resolved beta and alpha * beta per document group, in id order.
std::vector<GroupBudget> ResolveBudgets(const AnnotatedDocument& doc,
                                        const FusionConfig& config);

struct StepDistribution {
  Dist p_pub;
  std::vector<Dist> p_priv;
  Dist p_final;
  std::vector<MollificationOutcome> outcomes;
};

// Builds the m + 1 views of `doc`, queries the backend once per view with
// `generated` appended after the assistant prefix, and fuses. With zero
// groups p_final is p_pub. Distributions are floored at kProbabilityFloor.
class FusionEngine {
 public:
  FusionEngine(const DistributionProvider& backend, PromptBundle bundle,
               FusionConfig config);

  StepDistribution ComputeStep(const AnnotatedDocument& doc,
                               std::string_view generated) const;

  // Runs until max_tokens or the backend's terminator.
  FusionTranscript Generate(const AnnotatedDocument& doc) const;

  const FusionConfig& config() const { return config_; }

 private:
  std::vector<std::string> ViewPrompts(const AnnotatedDocument& doc) const;
  std::vector<Dist> Query(std::span<const std::string> prompts,
                          std::string_view generated) const;
  StepDistribution Fuse(std::vector<Dist> dists,
                        std::span<const GroupBudget> budgets) const;

  const DistributionProvider& backend_;
  PromptBundle bundle_;
  FusionConfig config_;
};

// Shared autoregressive loop: `next` gives the sampling distribution for the
// text generated so far and fills the step's per-group records.
using NextStepFn =
    std::function<Dist(std::string_view generated, StepRecord& record)>;

FusionTranscript SampleTranscript(const DistributionProvider& backend,
                                  int max_tokens, std::uint64_t seed,
                                  const NextStepFn& next);

// Floors and batches one query per context; issues a single batched call
// when the backend supports it and concurrent single calls otherwise.
std::vector<Dist> QueryContexts(const DistributionProvider& backend,
                                std::span<const std::string> contexts,
                                double temperature);

}  // namespace dpfusion

#endif  // DPFUSION_FUSION_H_
