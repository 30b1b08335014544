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

#ifndef DPFUSION_ACCOUNTANT_H_
#define DPFUSION_ACCOUNTANT_H_

#include <map>
#include <string>
#include <vector>

#include "dpfusion/dist.h"
#include "dpfusion/fusion.h"

namespace dpfusion {

inline constexpr double kDefaultDelta = 1e-5;

// How per-step observations combine into a transcript-level epsilon.
enum class Composition {
  // RDP composition: sum the per-step terms.
  kSum,
  // T times the term of the largest observation.
  kRunningMax,
};

// Per-token RDP cost for a group with budget beta among m groups:
//   1/(alpha-1) * log((m-1)/m + e^((alpha-1) * 4 * beta) / m).
double PerTokenRdp(double beta, int m, RenyiOrder order);

// epsilon' = epsilon + log(1/delta) / (alpha - 1), delta in (0, 1].
double RdpToDp(double epsilon_rdp, RenyiOrder order, double delta);

// T * PerTokenRdp(beta, m) + log(1/delta) / (alpha - 1), delta in (0, 1).
double TheoreticalEpsilon(double beta, int tokens, int m, RenyiOrder order,
                          double delta);

struct AccountantLedger {
  // Observed alpha * beta_{i,t}, one entry per generated token.
  std::map<int, std::vector<double>> per_group_records;
  // Configured beta_i per group.
  std::map<int, double> betas;
  int tokens = 0;
  int groups = 0;
  RenyiOrder order;
  double delta = kDefaultDelta;
};

AccountantLedger LedgerFromTranscript(const FusionTranscript& transcript,
                                      double delta = kDefaultDelta);

// PerTokenRdp evaluated at observed / alpha for every record, composed per
// `composition`, plus the delta term.
double DataDependentEpsilon(const AccountantLedger& ledger, int group_id,
                            Composition composition = Composition::kSum);

struct GroupPrivacy {
  int id = 0;
  double beta = 0.0;
  double eps_theoretical = 0.0;
  double eps_data = 0.0;
};

struct PrivacyReport {
  double delta = kDefaultDelta;
  std::vector<GroupPrivacy> groups;
};

PrivacyReport BuildReport(const AccountantLedger& ledger,
                          Composition composition = Composition::kSum);

// {"delta": float, "groups": [{"id", "beta", "eps_theoretical", "eps_data"}]}
std::string ReportToJson(const PrivacyReport& report);

struct EpsilonCurvePoint {
  int step = 0;  // tokens accounted so far, from 1
  int group = 0;
  double eps_data = 0.0;
  double eps_theoretical = 0.0;
};

// Cumulative epsilons after each token, both including the delta term.
std::vector<EpsilonCurvePoint> EpsilonCurve(
    const AccountantLedger& ledger,
    Composition composition = Composition::kSum);

// "step,group,eps_data,eps_theoretical" CSV.
std::string EpsilonCurveCsv(const std::vector<EpsilonCurvePoint>& curve);

}  // namespace dpfusion

#endif  // DPFUSION_ACCOUNTANT_H_
