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

#include "dpfusion/attacks.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

using nlohmann::json;

void CheckNonEmpty(std::span<const double> logprobs) {
  if (logprobs.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty log-probability list");
  }
}

// SplitMix64 finalizer over (seed, index).
std::uint64_t InstanceSeed(std::uint64_t seed, std::size_t index) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
}

double Score(const Scorer& scorer, std::span<const double> logprobs) {
  // Oriented so that larger is always the attacker's preferred candidate.
  return scorer.kind == ScorerKind::kLoss ? -LossScore(logprobs)
                                          : MinKScore(logprobs, scorer.k_percent);
}

InstanceOutcome Attack(const DistributionProvider& backend,
                       const AttackInstance& instance, const Scorer& scorer,
                       const PromptBundle& bundle, std::uint64_t seed) {
  InstanceOutcome outcome;
  const CandidateSet& set = instance.candidate_set;
  std::vector<double> scores;
  try {
    instance.Validate();
    for (const Candidate& candidate : set.candidates) {
      ContextView full;
      full.rendered_text =
          RenderWithReplacement(instance.doc, set.group_id, candidate);
      const std::string prompt = AssemblePrompt(full, bundle);
      scores.push_back(Score(
          scorer,
          SequenceLogprobs(backend, prompt, instance.privatized_output)));
    }
  } catch (const Error&) {
    outcome.skipped = true;
    return outcome;
  }
  const double best = *std::max_element(scores.begin(), scores.end());
  std::vector<int> ties;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] == best) ties.push_back(static_cast<int>(c));
  }
  std::mt19937_64 rng(seed);
  outcome.predicted_index = ties[UniformIndex(rng, ties.size())];
  outcome.correct = outcome.predicted_index == set.true_index;
  return outcome;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

void AttackInstance::Validate() const {
  const CandidateSet& set = candidate_set;
  const std::size_t parts = doc.SpansOf(set.group_id).size();
  if (set.candidates.empty() || set.true_index < 0 ||
      set.true_index >= static_cast<int>(set.candidates.size())) {
    throw Error(ErrorCode::kInvalidInput, "true index outside candidate set");
  }
  std::set<Candidate> seen;
  for (const Candidate& c : set.candidates) {
    if (c.size() != parts) {
      throw Error(ErrorCode::kInvalidInput,
                  "candidate part count differs from span count");
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate candidate");
    }
  }
}

ContextView AttackInstance::RedactedContext(
    std::string_view placeholder) const {
  return AllButOneView(doc, candidate_set.group_id, placeholder);
}

std::vector<double> SequenceLogprobs(const DistributionProvider& backend,
                                     std::string_view context,
                                     std::string_view continuation) {
  if (continuation.empty()) return {};
  try {
    return backend.ScoreContinuation(context, continuation);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTransport ||
        e.code() == ErrorCode::kMalformedResponse) {
      throw Error(ErrorCode::kScoring, e.what());
    }
    throw;
  }
}

double LossScore(std::span<const double> logprobs) {
  CheckNonEmpty(logprobs);
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return -sum / static_cast<double>(logprobs.size());
}

double MinKScore(std::span<const double> logprobs, double k_percent) {
  CheckNonEmpty(logprobs);
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw Error(ErrorCode::kInvalidInput, "k must lie in (0, 100]");
  }
  const std::size_t n = logprobs.size();
  // The small slack keeps products like 20% of 5 from rounding up to 2.
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::ceil(k_percent * static_cast<double>(n) / 100.0 - 1e-9)),
      1, n);
  std::vector<double> sorted(logprobs.begin(), logprobs.end());
  std::partial_sort(sorted.begin(), sorted.begin() + count, sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += sorted[i];
  return sum / static_cast<double>(count);
}

double Perplexity(std::span<const double> logprobs) {
  return std::exp(LossScore(logprobs));
}

AttackResult RunTokenRecovery(const DistributionProvider& backend,
                              std::span<const AttackInstance> instances,
                              const Scorer& scorer, const PromptBundle& bundle,
                              std::uint64_t seed, int threads) {
  AttackResult result;
  result.scorer = scorer;
  result.outcomes.resize(instances.size());
  const std::size_t workers = std::clamp<std::size_t>(
      threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
      std::max<std::size_t>(1, instances.size()));
  const auto run_stripe = [&](std::size_t first) {
    for (std::size_t i = first; i < instances.size(); i += workers) {
      result.outcomes[i] = Attack(backend, instances[i], scorer, bundle,
                                  InstanceSeed(seed, i));
    }
  };
  if (workers == 1) {
    run_stripe(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_stripe, w);
  }

  int correct = 0;
  double trivial = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const InstanceOutcome& o = result.outcomes[i];
    if (o.skipped) {
      ++result.skipped;
      continue;
    }
    ++result.n;
    correct += o.correct ? 1 : 0;
    trivial += 1.0 / static_cast<double>(
                         instances[i].candidate_set.candidates.size());
  }
  if (result.n > 0) {
    result.asr = static_cast<double>(correct) / result.n;
    result.advantage = result.asr - trivial / result.n;
  }
  return result;
}

CandidateSet BuildCandidateSet(const AnnotatedDocument& doc, int group_id,
                               std::span<const std::string> pool,
                               std::size_t size, std::uint64_t seed) {
  const std::vector<Span> spans = doc.SpansOf(group_id);
  if (spans.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "group " + std::to_string(group_id) + " has no spans");
  }
  if (size < 2) throw Error(ErrorCode::kInvalidInput, "need >= 2 candidates");
  Candidate truth;
  std::vector<std::string> distinct;
  for (const Span& s : spans) {
    truth.push_back(doc.text().substr(s.start, s.end - s.start));
    if (std::find(distinct.begin(), distinct.end(), truth.back()) ==
        distinct.end()) {
      distinct.push_back(truth.back());
    }
  }
  std::vector<std::string> decoy_pool;
  for (const std::string& entry : pool) {
    if (std::find(distinct.begin(), distinct.end(), entry) == distinct.end() &&
        std::find(decoy_pool.begin(), decoy_pool.end(), entry) ==
            decoy_pool.end()) {
      decoy_pool.push_back(entry);
    }
  }
  if (decoy_pool.empty()) {
    throw Error(ErrorCode::kInvalidInput, "candidate pool has no decoys");
  }

  std::mt19937_64 rng(seed);
  std::set<Candidate> seen = {truth};
  std::vector<Candidate> decoys;
  for (int attempts = 0; decoys.size() + 1 < size; ++attempts) {
    if (attempts > 10000) {
      throw Error(ErrorCode::kInvalidInput,
                  "candidate pool too small for " + std::to_string(size) +
                      " distinct candidates");
    }
    // Repeated mentions of one entity get the same substitute.
    std::map<std::string, std::string> substitute;
    for (const std::string& original : distinct) {
      substitute[original] = decoy_pool[UniformIndex(rng, decoy_pool.size())];
    }
    Candidate decoy;
    for (const std::string& part : truth) decoy.push_back(substitute[part]);
    if (seen.insert(decoy).second) decoys.push_back(std::move(decoy));
  }

  CandidateSet set;
  set.group_id = group_id;
  set.true_index = static_cast<int>(UniformIndex(rng, size));
  for (std::size_t c = 0, d = 0; c < size; ++c) {
    set.candidates.push_back(static_cast<int>(c) == set.true_index
                                 ? truth
                                 : std::move(decoys[d++]));
  }
  return set;
}

std::vector<AttackInstance> ParseAttackInstances(std::string_view jsonl) {
  std::vector<AttackInstance> instances;
  std::istringstream lines{std::string(jsonl)};
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CandidateSet set;
      set.group_id = j.at("target_group").get<int>();
      set.candidates = j.at("candidates").get<std::vector<Candidate>>();
      set.true_index = j.at("true_index").get<int>();
      AttackInstance instance{ParseDocumentJson(j.at("doc").dump()),
                              j.at("output").get<std::string>(),
                              std::move(set)};
      instance.doc.group(instance.candidate_set.group_id);
      instances.push_back(std::move(instance));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string("bad attack instance: ") + e.what());
    }
  }
  return instances;
}

std::vector<AttackInstance> LoadAttackInstances(const std::string& path) {
  return ParseAttackInstances(ReadFile(path));
}

std::string AttackInstanceToJson(const AttackInstance& instance) {
  return json{{"doc", json::parse(DocumentToJson(instance.doc))},
              {"target_group", instance.candidate_set.group_id},
              {"output", instance.privatized_output},
              {"candidates", instance.candidate_set.candidates},
              {"true_index", instance.candidate_set.true_index}}
      .dump();
}

std::string AttackSummaryJson(const AttackResult& result) {
  json summary = {{"asr", result.asr},
                  {"advantage", result.advantage},
                  {"n", result.n},
                  {"skipped", result.skipped},
                  {"scorer",
                   result.scorer.kind == ScorerKind::kLoss ? "loss" : "mink"}};
  if (result.scorer.kind == ScorerKind::kMinK) {
    summary["k"] = result.scorer.k_percent;
  } else {
    summary["k"] = nullptr;
  }
  return summary.dump(2);
}

}  // namespace dpfusion
