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

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

void CheckGroups(int m) {
  if (m < 1) throw Error(ErrorCode::kInvalidInput, "group count must be >= 1");
}

double DeltaTerm(RenyiOrder order, double delta) {
  return std::log(1.0 / delta) / (order.value() - 1.0);
}

const std::vector<double>& RecordsOf(const AccountantLedger& ledger,
                                     int group_id) {
  const auto it = ledger.per_group_records.find(group_id);
  if (it == ledger.per_group_records.end()) {
    throw Error(ErrorCode::kInvalidInput,
                "ledger has no records for group " + std::to_string(group_id));
  }
  return it->second;
}

}  // namespace

double PerTokenRdp(double beta, int m, RenyiOrder order) {
  CheckGroups(m);
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidInput, "beta must be >= 0");
  const double a1 = order.value() - 1.0;
  // log((m-1)/m + e^x/m) == log1p(expm1(x)/m), exact at beta = 0.
  return std::log1p(std::expm1(a1 * 4.0 * beta) / m) / a1;
}

double RdpToDp(double epsilon_rdp, RenyiOrder order, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "delta must lie in (0, 1]");
  }
  return epsilon_rdp + DeltaTerm(order, delta);
}

double TheoreticalEpsilon(double beta, int tokens, int m, RenyiOrder order,
                          double delta) {
  CheckGroups(m);
  if (tokens < 1) throw Error(ErrorCode::kInvalidInput, "T must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "delta must lie in (0, 1)");
  }
  return tokens * PerTokenRdp(beta, m, order) + DeltaTerm(order, delta);
}

AccountantLedger LedgerFromTranscript(const FusionTranscript& transcript,
                                      double delta) {
  const RunEcho& echo = transcript.config_echo;
  AccountantLedger ledger;
  ledger.order = RenyiOrder(echo.alpha);
  ledger.delta = delta;
  ledger.tokens = static_cast<int>(transcript.steps.size());
  ledger.groups = static_cast<int>(echo.budgets.size());
  for (const GroupBudget& b : echo.budgets) {
    ledger.betas[b.id] = b.beta;
    auto& records = ledger.per_group_records[b.id];
    records.reserve(transcript.steps.size());
    for (const StepRecord& step : transcript.steps) {
      const auto it = step.per_group.find(b.id);
      if (it == step.per_group.end()) {
        throw Error(ErrorCode::kInvalidInput,
                    "step " + std::to_string(step.step_index) +
                        " lacks a record for group " + std::to_string(b.id));
      }
      records.push_back(it->second.achieved_divergence);
    }
  }
  return ledger;
}

double DataDependentEpsilon(const AccountantLedger& ledger, int group_id,
                            Composition composition) {
  const auto& records = RecordsOf(ledger, group_id);
  const double alpha = ledger.order.value();
  double rdp = 0.0;
  if (composition == Composition::kSum) {
    for (double observed : records) {
      rdp += PerTokenRdp(observed / alpha, ledger.groups, ledger.order);
    }
  } else if (!records.empty()) {
    const double worst = *std::max_element(records.begin(), records.end());
    rdp = records.size() * PerTokenRdp(worst / alpha, ledger.groups,
                                       ledger.order);
  }
  return RdpToDp(rdp, ledger.order, ledger.delta);
}

PrivacyReport BuildReport(const AccountantLedger& ledger,
                          Composition composition) {
  PrivacyReport report;
  report.delta = ledger.delta;
  for (const auto& [id, beta] : ledger.betas) {
    GroupPrivacy g;
    g.id = id;
    g.beta = beta;
    g.eps_theoretical =
        ledger.tokens == 0
            ? DeltaTerm(ledger.order, ledger.delta)
            : TheoreticalEpsilon(beta, ledger.tokens, ledger.groups,
                                 ledger.order, ledger.delta);
    g.eps_data = DataDependentEpsilon(ledger, id, composition);
    report.groups.push_back(g);
  }
  return report;
}

std::string ReportToJson(const PrivacyReport& report) {
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupPrivacy& g : report.groups) {
    groups.push_back({{"id", g.id},
                      {"beta", g.beta},
                      {"eps_theoretical", g.eps_theoretical},
                      {"eps_data", g.eps_data}});
  }
  return nlohmann::json{{"delta", report.delta}, {"groups", groups}}.dump(2);
}

std::vector<EpsilonCurvePoint> EpsilonCurve(const AccountantLedger& ledger,
                                            Composition composition) {
  std::vector<EpsilonCurvePoint> curve;
  const double alpha = ledger.order.value();
  const double delta_term = DeltaTerm(ledger.order, ledger.delta);
  for (const auto& [id, beta] : ledger.betas) {
    const auto& records = RecordsOf(ledger, id);
    const double per_token_theory = PerTokenRdp(beta, ledger.groups,
                                                ledger.order);
    double sum = 0.0;
    double worst = 0.0;
    for (std::size_t t = 0; t < records.size(); ++t) {
      const double term = PerTokenRdp(records[t] / alpha, ledger.groups,
                                      ledger.order);
      sum += term;
      worst = std::max(worst, term);
      const double rdp =
          composition == Composition::kSum ? sum : (t + 1) * worst;
      curve.push_back({static_cast<int>(t + 1), id, rdp + delta_term,
                       (t + 1) * per_token_theory + delta_term});
    }
  }
  return curve;
}

std::string EpsilonCurveCsv(const std::vector<EpsilonCurvePoint>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "step,group,eps_data,eps_theoretical\n";
  for (const EpsilonCurvePoint& p : curve) {
    out << p.step << ',' << p.group << ',' << p.eps_data << ','
        << p.eps_theoretical << '\n';
  }
  return out.str();
}

}  // namespace dpfusion
