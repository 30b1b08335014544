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

#include "dpfusion/accountant.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dpfusion/error.h"
#include "oracles.h"

namespace dpfusion {
namespace {

AccountantLedger Ledger(std::vector<double> records, double beta, int m = 8) {
  AccountantLedger ledger;
  ledger.per_group_records[1] = std::move(records);
  ledger.betas[1] = beta;
  ledger.tokens = static_cast<int>(ledger.per_group_records[1].size());
  ledger.groups = m;
  return ledger;
}

TEST(TheoreticalEpsilonTest, ReportedRange) {
  const double low = TheoreticalEpsilon(0.01, 900, 8, RenyiOrder(), 1e-5);
  const double high = TheoreticalEpsilon(0.10, 900, 8, RenyiOrder(), 1e-5);
  EXPECT_NEAR(low, oracle::Epsilon(0.01, 900, 8, 2.0, 1e-5), 1e-10);
  EXPECT_NEAR(high, oracle::Epsilon(0.10, 900, 8, 2.0, 1e-5), 1e-10);
  EXPECT_NEAR(low, 16.1, 0.05);
  EXPECT_NEAR(high, 65.2, 0.05);
}

TEST(TheoreticalEpsilonTest, ZeroBudgetLeavesDeltaTerm) {
  for (int t : {1, 50, 900}) {
    for (int m : {1, 3, 8}) {
      EXPECT_EQ(TheoreticalEpsilon(0.0, t, m, RenyiOrder(), 1e-5),
                std::log(1e5));
    }
  }
}

TEST(TheoreticalEpsilonTest, DomainErrors) {
  EXPECT_THROW(TheoreticalEpsilon(0.1, 0, 8, RenyiOrder(), 1e-5), Error);
  EXPECT_THROW(TheoreticalEpsilon(0.1, 9, 0, RenyiOrder(), 1e-5), Error);
  EXPECT_THROW(TheoreticalEpsilon(0.1, 9, 8, RenyiOrder(), 1.0), Error);
  EXPECT_THROW(TheoreticalEpsilon(-0.1, 9, 8, RenyiOrder(), 1e-5), Error);
}

TEST(TheoreticalEpsilonTest, Monotone) {
  double prev = 0.0;
  for (int t = 1; t <= 900; t += 37) {
    const double e = TheoreticalEpsilon(0.05, t, 8, RenyiOrder(), 1e-5);
    EXPECT_GT(e, prev);
    prev = e;
  }
  prev = 0.0;
  for (double b = 0.005; b <= 0.2; b += 0.005) {
    const double e = TheoreticalEpsilon(b, 100, 8, RenyiOrder(), 1e-5);
    EXPECT_GT(e, prev);
    prev = e;
  }
  prev = INFINITY;
  for (double d = 1e-9; d < 0.5; d *= 3.0) {
    const double e = TheoreticalEpsilon(0.05, 100, 8, RenyiOrder(), d);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(RdpToDpTest, Examples) {
  EXPECT_EQ(RdpToDp(2.5, RenyiOrder(), 1.0), 2.5);
  EXPECT_NEAR(RdpToDp(1.0, RenyiOrder(), 0.01), 5.6052, 1e-4);
  EXPECT_NEAR(RdpToDp(0.0, RenyiOrder(), 1e-5), 11.5129, 1e-4);
  EXPECT_THROW(RdpToDp(1.0, RenyiOrder(), 0.0), Error);
}

TEST(PerTokenRdpTest, StableForSmallBudgets) {
  EXPECT_EQ(PerTokenRdp(0.0, 8, RenyiOrder()), 0.0);
  EXPECT_NEAR(PerTokenRdp(1e-12, 1, RenyiOrder()), 4e-12, 1e-24);
  EXPECT_NEAR(PerTokenRdp(0.07, 5, RenyiOrder(3.0)),
              oracle::TokenCost(0.07, 5, 3.0), 1e-14);
}

TEST(DataDependentEpsilonTest, Examples) {
  const double delta_term = std::log(1e5);
  EXPECT_EQ(DataDependentEpsilon(Ledger(std::vector<double>(900, 0.0), 0.01), 1),
            delta_term);

  const auto saturated = Ledger(std::vector<double>(900, 2.0 * 0.01), 0.01);
  EXPECT_NEAR(DataDependentEpsilon(saturated, 1),
              TheoreticalEpsilon(0.01, 900, 8, RenyiOrder(), 1e-5), 1e-10);

  std::vector<double> half(900, 0.0);
  std::fill(half.begin(), half.begin() + 450, 2.0 * 0.01);
  const double got = DataDependentEpsilon(Ledger(half, 0.01), 1);
  EXPECT_NEAR(got, 450 * oracle::TokenCost(0.01, 8, 2.0) + delta_term, 1e-10);
  EXPECT_NEAR(got, 13.8, 0.05);
}

TEST(DataDependentEpsilonTest, RunningMaxSwitch) {
  const auto ledger = Ledger({0.0, 0.02, 0.0, 0.0}, 0.01);
  const double sum = DataDependentEpsilon(ledger, 1, Composition::kSum);
  const double max = DataDependentEpsilon(ledger, 1, Composition::kRunningMax);
  EXPECT_NEAR(max - std::log(1e5), 4.0 * oracle::TokenCost(0.01, 8, 2.0), 1e-12);
  EXPECT_LT(sum, max);
}

TEST(DataDependentEpsilonTest, UnknownGroup) {
  EXPECT_THROW(DataDependentEpsilon(Ledger({0.0}, 0.01), 2), Error);
}

TEST(AccountantProperty, DominanceAndAdditivity) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = 0.001 + 0.2 * unit(rng);
    const int t = 1 + static_cast<int>(rng() % 300);
    std::vector<double> records(t);
    for (double& r : records) r = 2.0 * beta * unit(rng);
    const auto ledger = Ledger(records, beta, 1 + trial % 8);

    EXPECT_LE(DataDependentEpsilon(ledger, 1),
              TheoreticalEpsilon(beta, t, ledger.groups, RenyiOrder(), 1e-5));

    const std::size_t cut = rng() % records.size();
    const auto head = Ledger({records.begin(), records.begin() + cut}, beta,
                             ledger.groups);
    const auto tail = Ledger({records.begin() + cut, records.end()}, beta,
                             ledger.groups);
    const double delta_term = std::log(1e5);
    EXPECT_NEAR(DataDependentEpsilon(head, 1) + DataDependentEpsilon(tail, 1) -
                    delta_term,
                DataDependentEpsilon(ledger, 1), 1e-12);
  }
}

TEST(EpsilonCurveTest, EndsAtReportValues) {
  auto ledger = Ledger({0.0, 0.01, 0.02, 0.005}, 0.01, 3);
  const auto curve = EpsilonCurve(ledger);
  ASSERT_EQ(curve.size(), 4u);
  const auto report = BuildReport(ledger);
  EXPECT_DOUBLE_EQ(curve.back().eps_data, report.groups[0].eps_data);
  EXPECT_NEAR(curve.back().eps_theoretical, report.groups[0].eps_theoretical,
              1e-12);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].eps_data, curve[i - 1].eps_data);
  }
  const std::string csv = EpsilonCurveCsv(curve);
  EXPECT_EQ(csv.rfind("step,group,eps_data,eps_theoretical\n", 0), 0u);
}

TEST(LedgerFromTranscriptTest, CollectsRecords) {
  FusionTranscript transcript;
  transcript.config_echo.budgets = {{1, 0.01, 0.02}, {2, 0.05, 0.1}};
  for (int t = 0; t < 3; ++t) {
    StepRecord step;
    step.step_index = t;
    step.per_group[1] = {0.5, 0.01 * t, true};
    step.per_group[2] = {1.0, 0.0, false};
    transcript.steps.push_back(step);
  }
  const auto ledger = LedgerFromTranscript(transcript);
  EXPECT_EQ(ledger.tokens, 3);
  EXPECT_EQ(ledger.groups, 2);
  EXPECT_EQ(ledger.per_group_records.at(1), (std::vector<double>{0, 0.01, 0.02}));
  transcript.steps[1].per_group.erase(2);
  EXPECT_THROW(LedgerFromTranscript(transcript), Error);
}

}  // namespace
}  // namespace dpfusion
