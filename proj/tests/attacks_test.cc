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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dpfusion/error.h"
#include "dpfusion/mock_backend.h"

namespace dpfusion {
namespace {

MockModel Uniform4() {
  MockConfig c;
  c.mode = MockMode::kUniform;
  c.vocab = {"a", "b", "c", "<eos>"};
  return MockModel(c);
}

AnnotatedDocument TwoNameDoc() {
  return AnnotatedDocument("a", "Mr Kovac met Ms Horvath; Mr Kovac left.",
                           {{3, 8, 1}, {16, 23, 1}, {28, 33, 1}},
                           {{1, "PERSON", 0.1}});
}

TEST(ScoresTest, Examples) {
  const std::vector<double> two = {-1.0, -3.0};
  EXPECT_DOUBLE_EQ(LossScore(two), 2.0);
  EXPECT_DOUBLE_EQ(Perplexity(two), std::exp(2.0));
  const std::vector<double> four(5, std::log(0.25));
  EXPECT_NEAR(LossScore(four), std::log(4.0), 1e-15);
  EXPECT_NEAR(Perplexity(four), 4.0, 1e-12);
  EXPECT_EQ(Perplexity(std::vector<double>(3, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(MinKScore(std::vector<double>{-1, -5, -2, -4}, 50), -4.5);
  EXPECT_DOUBLE_EQ(MinKScore(std::vector<double>{-0.3}, 1), -0.3);
  EXPECT_DOUBLE_EQ(MinKScore(std::vector<double>{-0.3}, 100), -0.3);
  EXPECT_THROW(LossScore(std::vector<double>{}), Error);
  EXPECT_THROW(MinKScore(two, 0.0), Error);
  EXPECT_THROW(MinKScore(two, 101.0), Error);
}

TEST(ScoresTest, MinKCountRounding) {
  // 20% of 5 selects exactly one entry; 21% rounds up to two.
  const std::vector<double> five = {-1, -2, -3, -4, -5};
  EXPECT_DOUBLE_EQ(MinKScore(five, 20), -5.0);
  EXPECT_DOUBLE_EQ(MinKScore(five, 21), -4.5);
}

TEST(ScoresProperty, FullMinKIsNegatedLoss) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-12.0, 0.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> lp(1 + trial % 60);
    for (double& x : lp) x = u(rng);
    EXPECT_NEAR(MinKScore(lp, 100.0), -LossScore(lp), 1e-12);
    EXPECT_EQ(Perplexity(lp), std::exp(LossScore(lp)));
    std::vector<double> shuffled = lp;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(LossScore(shuffled), LossScore(lp), 1e-12);
  }
}

TEST(SequenceLogprobsTest, UniformAndEmpty) {
  const MockModel model = Uniform4();
  const auto lp = SequenceLogprobs(model, "ctx", "abc");
  ASSERT_EQ(lp.size(), 3u);
  for (double x : lp) EXPECT_NEAR(x, std::log(0.25), 1e-15);
  EXPECT_TRUE(SequenceLogprobs(model, "ctx", "").empty());
}

TEST(SequenceLogprobsTest, ChainRule) {
  MockConfig c;
  c.seed = 12;
  const MockModel model(c);
  const auto whole = SequenceLogprobs(model, "past: ", "ab cd");
  const auto head = SequenceLogprobs(model, "past: ", "ab");
  const auto tail = SequenceLogprobs(model, "past: ab", " cd");
  ASSERT_EQ(whole.size(), head.size() + tail.size());
  for (std::size_t i = 0; i < head.size(); ++i) EXPECT_NEAR(whole[i], head[i], 1e-12);
  for (std::size_t i = 0; i < tail.size(); ++i) {
    EXPECT_NEAR(whole[head.size() + i], tail[i], 1e-12);
  }
}

TEST(CandidateSetTest, ConsistentSubstitution) {
  const std::vector<std::string> pool = {"Mr Novak", "Ms Weber", "Mr Berg",
                                         "Ms Duval", "Mr Kovac"};
  const AnnotatedDocument doc = TwoNameDoc();
  const CandidateSet set = BuildCandidateSet(doc, 1, pool, 5, 42);
  ASSERT_EQ(set.candidates.size(), 5u);
  EXPECT_EQ(set.candidates[set.true_index],
            (Candidate{"Kovac", "Horvath", "Kovac"}));
  for (const Candidate& c : set.candidates) {
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0], c[2]);
  }
  AttackInstance instance{doc, "out", set};
  EXPECT_NO_THROW(instance.Validate());
  EXPECT_EQ(instance.RedactedContext().rendered_text,
            "Mr ___ met Ms ___; Mr ___ left.");
  EXPECT_THROW(BuildCandidateSet(doc, 1, std::vector<std::string>{"Kovac"}, 5, 1),
               Error);
}

TEST(CandidateSetTest, TrueIndexVaries) {
  const std::vector<std::string> pool = {"A", "B", "C", "D", "E", "F", "G"};
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    seen.insert(BuildCandidateSet(TwoNameDoc(), 1, pool, 5, seed).true_index);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(AttackInstanceTest, Validation) {
  AttackInstance bad{TwoNameDoc(), "x", {1, {{"a", "b", "a"}, {"a", "b", "a"}}, 0}};
  EXPECT_THROW(bad.Validate(), Error);
  bad.candidate_set.candidates = {{"a", "b"}, {"c", "d"}};
  EXPECT_THROW(bad.Validate(), Error);
  bad.candidate_set.candidates = {{"a", "b", "a"}, {"c", "d", "c"}};
  bad.candidate_set.true_index = 2;
  EXPECT_THROW(bad.Validate(), Error);
}

TEST(AttackInstanceTest, JsonRoundTrip) {
  const std::vector<std::string> pool = {"P", "Q", "R", "S", "T"};
  AttackInstance instance{TwoNameDoc(), "released text",
                          BuildCandidateSet(TwoNameDoc(), 1, pool, 5, 7)};
  const auto back = ParseAttackInstances(AttackInstanceToJson(instance) + "\n");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].privatized_output, "released text");
  EXPECT_EQ(back[0].candidate_set.candidates, instance.candidate_set.candidates);
  EXPECT_EQ(back[0].candidate_set.true_index, instance.candidate_set.true_index);
  EXPECT_THROW(ParseAttackInstances("{\"doc\": 1}"), Error);
}

std::vector<AttackInstance> UniformInstances(int n, std::uint64_t seed) {
  const std::vector<std::string> pool = {"P", "Q", "R", "S", "T", "U"};
  std::vector<AttackInstance> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({TwoNameDoc(), "abcab",
                   BuildCandidateSet(TwoNameDoc(), 1, pool, 5, seed + i)});
  }
  return out;
}

TEST(TokenRecoveryTest, UninformativeScorerNearChance) {
  const MockModel model = Uniform4();
  const auto instances = UniformInstances(2000, 100);
  const auto result = RunTokenRecovery(model, instances, Scorer{},
                                       PromptBundle::Default(), 5);
  EXPECT_EQ(result.n, 2000);
  EXPECT_EQ(result.skipped, 0);
  EXPECT_NEAR(result.asr, 0.2, 0.03);
  EXPECT_NEAR(result.advantage, result.asr - 0.2, 1e-12);
}

TEST(TokenRecoveryTest, ThreadCountDoesNotChangeResult) {
  MockConfig c;
  c.seed = 2;
  const MockModel model(c);
  const auto instances = UniformInstances(40, 7);
  const Scorer mink{ScorerKind::kMinK, 20};
  const auto one = RunTokenRecovery(model, instances, mink, PromptBundle::Default(), 9, 1);
  const auto four = RunTokenRecovery(model, instances, mink, PromptBundle::Default(), 9, 4);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    EXPECT_EQ(one.outcomes[i].predicted_index, four.outcomes[i].predicted_index);
  }
  EXPECT_EQ(one.asr, four.asr);
}

TEST(TokenRecoveryTest, UnscorableInstancesAreSkipped) {
  const MockModel model = Uniform4();
  auto instances = UniformInstances(3, 1);
  // "z" is outside the four-token vocabulary.
  instances[1].privatized_output = "zzz";
  const auto result = RunTokenRecovery(model, instances, Scorer{},
                                       PromptBundle::Default(), 1);
  EXPECT_EQ(result.skipped, 1);
  EXPECT_EQ(result.n, 2);
  EXPECT_TRUE(result.outcomes[1].skipped);
}

TEST(TokenRecoveryTest, SummaryJson) {
  AttackResult r;
  r.asr = 0.25;
  r.advantage = 0.05;
  r.n = 4;
  r.scorer = {ScorerKind::kMinK, 20};
  const std::string json = AttackSummaryJson(r);
  EXPECT_NE(json.find("\"scorer\": \"mink\""), std::string::npos);
  EXPECT_NE(json.find("\"k\": 20"), std::string::npos);
}

}  // namespace
}  // namespace dpfusion
