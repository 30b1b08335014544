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

#ifndef DPFUSION_ATTACKS_H_
#define DPFUSION_ATTACKS_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpfusion/backend.h"
#include "dpfusion/document.h"

namespace dpfusion {

inline constexpr std::size_t kDefaultCandidateCount = 5;

// One candidate is an ordered list of replacement strings, one per span of
// the targeted group.
using Candidate = std::vector<std::string>;

struct CandidateSet {
  int group_id = 0;
  std::vector<Candidate> candidates;
  int true_index = 0;
};

struct AttackInstance {
  AnnotatedDocument doc;
  // D', the released text.
  std::string privatized_output;
  CandidateSet candidate_set;

  // Throws kInvalidInput when the true index is out of range, candidates
  // repeat, or a candidate has the wrong number of parts.
  void Validate() const;
  // All groups revealed except the target.
  ContextView RedactedContext(std::string_view placeholder =
                                  kDefaultPlaceholder) const;
};

enum class ScorerKind { kLoss, kMinK };

struct Scorer {
  ScorerKind kind = ScorerKind::kLoss;
  double k_percent = 20.0;
};

// Per-token log-probabilities of `continuation` given `context`.
std::vector<double> SequenceLogprobs(const DistributionProvider& backend,
                                     std::string_view context,
                                     std::string_view continuation);

// Mean negative log-probability; lower means more likely.
double LossScore(std::span<const double> logprobs);
// Mean of the ceil(k% * n) smallest log-probabilities; higher means more
// likely.
double MinKScore(std::span<const double> logprobs, double k_percent);
// exp(LossScore).
double Perplexity(std::span<const double> logprobs);

struct InstanceOutcome {
  int predicted_index = -1;
  bool correct = false;
  bool skipped = false;
};

struct AttackResult {
  std::vector<InstanceOutcome> outcomes;
  double asr = 0.0;
  // asr minus the uniform-prior success rate 1/|C|.
  double advantage = 0.0;
  int n = 0;
  int skipped = 0;
  Scorer scorer;
};

// Scores the released text under the defender's full-document prompt for
// every candidate completion and guesses the best one. Ties break uniformly
// at random from a per-instance stream derived from `seed`, so results do
// not depend on `threads`. A candidate that fails to score skips its
// instance.
AttackResult RunTokenRecovery(const DistributionProvider& backend,
                              std::span<const AttackInstance> instances,
                              const Scorer& scorer, const PromptBundle& bundle,
                              std::uint64_t seed, int threads = 1);

// True candidate plus `size - 1` decoys; each decoy swaps every distinct
// span string of the group for a different pool entry. The true candidate
// lands at a random index. Throws kInvalidInput when the pool cannot supply
// enough distinct decoys.
CandidateSet BuildCandidateSet(const AnnotatedDocument& doc, int group_id,
                               std::span<const std::string> pool,
                               std::size_t size, std::uint64_t seed);

// JSONL record: {"doc": {document}, "target_group": int, "output": str,
//                "candidates": [[str]], "true_index": int}
std::vector<AttackInstance> ParseAttackInstances(std::string_view jsonl);
std::vector<AttackInstance> LoadAttackInstances(const std::string& path);
std::string AttackInstanceToJson(const AttackInstance& instance);

// {"asr", "advantage", "n", "skipped", "scorer", "k"}
std::string AttackSummaryJson(const AttackResult& result);

}  // namespace dpfusion

#endif  // DPFUSION_ATTACKS_H_
