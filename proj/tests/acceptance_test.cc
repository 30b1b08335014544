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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "dpfusion/accountant.h"
#include "dpfusion/attacks.h"
#include "dpfusion/baselines.h"
#include "dpfusion/dist.h"
#include "dpfusion/document.h"
#include "dpfusion/fusion.h"
#include "dpfusion/mock_backend.h"
#include "dpfusion/mollifier.h"
#include "oracles.h"

namespace dpfusion {
namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

// Figures shared between criteria.
std::vector<FusionTranscript> g_transcripts;

Verdict DivergencePathsAgree() {
  std::mt19937_64 rng(20240101);
  const std::size_t sizes[] = {2, 10, 100, 1000};
  double worst = 0.0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = sizes[i % 4];
    pairs.emplace_back(oracle::RandomProbs(rng, v, 0.5),
                       oracle::RandomProbs(rng, v, 0.5));
  }
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [p, q] : pairs) {
    const Dist dp = Dist::Normalized(p);
    const Dist dq = Dist::Normalized(q);
    const double fast = RenyiDivergence(dp, dq, RenyiOrder(2.0));
    const double general = RenyiDivergenceGeneralOrder(dp, dq, RenyiOrder(2.0));
    const double brute =
        oracle::Renyi2(oracle::Coords(dp), oracle::Coords(dq));
    worst = std::max({worst, std::abs(fast - general), std::abs(fast - brute),
                      std::abs(general - brute)});
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {worst <= 1e-12 && seconds < 10.0,
          Fmt("1000 pairs, max |diff| %.3g (limit 1e-12), %.3f s (limit 10 s)",
              worst, seconds)};
}

Verdict MixtureMonotone() {
  std::mt19937_64 rng(7);
  int violations = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t v = 2 + static_cast<std::size_t>(rng() % 200);
    const Dist p = oracle::RandomDist(rng, v, 0.5);
    const Dist q = oracle::RandomDist(rng, v, 0.5);
    double prev = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double d = SymmetricRenyi(Mix(k / 100.0, p, q), q);
      if (d < prev - 1e-12) ++violations;
      prev = d;
    }
  }
  return {violations == 0,
          Fmt("500 pairs x 101 grid points, %d violations (slack 1e-12)",
              violations)};
}

Verdict BisectionMatchesGrid() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_bound(std::log(1e-4), 0.0);
  const std::size_t sizes[] = {2, 10, 100};
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto p = oracle::RandomProbs(rng, sizes[i % 3], 0.5);
    const auto q = oracle::RandomProbs(rng, sizes[i % 3], 0.5);
    const double bound = std::exp(log_bound(rng));
    const double got =
        FindMaxLambda(Dist::Normalized(p), Dist::Normalized(q), RenyiOrder(),
                      bound)
            .lambda;
    worst = std::max(worst, std::abs(got - oracle::GridLambda(p, q, bound)));
  }
  const double example =
      FindMaxLambda(Dist::FromProbabilities({0.7, 0.3}),
                    Dist::FromProbabilities({0.5, 0.5}), RenyiOrder(), 0.04)
          .lambda;
  const bool pass = worst <= 2e-4 && std::abs(example - 0.4950) <= 2e-4;
  return {pass, Fmt("500 pairs max |bisect - grid| %.3g (limit 2e-4); "
                    "worked example lambda %.6f (0.4950 +- 0.0002)",
                    worst, example)};
}

AnnotatedDocument CaseDocument(int variant, double beta) {
  static const char* kNames[] = {"Anton Kovac", "Ingrid Solberg", "Pavel Dragan",
                                 "Marta Nowak", "Omar Haddad"};
  static const char* kCities[] = {"Trnava", "Bergen", "Cluj", "Gdansk", "Tunis"};
  const std::string name = kNames[variant % 5];
  const std::string city = kCities[(variant / 5) % 5];
  const std::string date = std::to_string(1990 + variant % 30);
  std::string text = "The applicant, ";
  std::vector<Span> spans;
  auto add = [&](const std::string& s, int group) {
    spans.push_back({text.size(), text.size() + s.size(), group});
    text += s;
  };
  add(name, 1);
  text += ", was arrested in ";
  add(city, 2);
  text += " in ";
  add(date, 3);
  text += ". ";
  add(name, 1);
  text += " complained about the length of detention.";
  return AnnotatedDocument("case-" + std::to_string(variant), text, spans,
                           {{1, "PERSON", beta}, {2, "LOC", beta}, {3, "DATE", beta}});
}

Verdict PerStepBudgetRespected() {
  const double bounds[] = {0.01, 0.05, 0.1};
  double worst_excess = -INFINITY;
  std::size_t records = 0;
  bool all_saturation_seen = true;
  for (int run = 0; run < 100; ++run) {
    MockConfig mock;
    mock.seed = 1000 + run;
    const MockModel model(mock);
    FusionConfig config;
    config.max_tokens = 50;
    config.rng_seed = run;
    const double bound = bounds[run % 3];
    const FusionEngine engine(model, PromptBundle::Default(), config);
    const auto transcript = engine.Generate(CaseDocument(run, bound / 2.0));
    if (!transcript.valid) return {false, "generation failed: " + transcript.error};
    bool saturated = false;
    for (const auto& step : transcript.steps) {
      if (step.per_group.size() != 3) return {false, "missing group record"};
      for (const auto& [id, o] : step.per_group) {
        worst_excess = std::max(worst_excess, o.achieved_divergence - bound);
        saturated |= o.saturated;
        ++records;
      }
    }
    all_saturation_seen &= saturated;
    g_transcripts.push_back(transcript);
  }
  return {worst_excess <= 1e-9,
          Fmt("100 runs, %zu records, max(achieved - bound) %.3g (limit 1e-9)%s",
              records, worst_excess,
              all_saturation_seen ? ", bound active in every run" : "")};
}

Verdict SingleStepMechanism() {
  // Adjacent inputs: D reveals the group's text, D' holds only the
  // placeholder where that text was, so both its views render alike.
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "c", "<eos>"};
  const PromptBundle bundle = PromptBundle::Default();
  double worst_excess = -INFINITY;
  for (int pair = 0; pair < 20; ++pair) {
    const std::string secret = "Name" + std::to_string(pair);
    const std::string head = "Case " + std::to_string(pair) + ": ";
    const double beta = 0.005 * (1 + pair);
    const AnnotatedDocument with(
        "d", head + secret + " sued.", {{head.size(), head.size() + secret.size(), 1}},
        {{1, "PERSON", beta}});
    const AnnotatedDocument without(
        "d'", head + bundle.placeholder + " sued.",
        {{head.size(), head.size() + bundle.placeholder.size(), 1}},
        {{1, "PERSON", beta}});
    const Partition parts = PartitionDocument(with, bundle.placeholder);

    MockConfig mock;
    mock.mode = MockMode::kTable;
    mock.vocab = vocab;
    mock.script[AssemblePrompt(parts.public_view, bundle)] =
        oracle::RandomProbs(rng, 4, 0.3);
    mock.script[AssemblePrompt(parts.group_views[0], bundle)] =
        oracle::RandomProbs(rng, 4, 0.3);
    const MockModel model(mock);
    const FusionEngine engine(model, bundle, FusionConfig{});

    const Dist out_d = engine.ComputeStep(with, "").p_final;
    const Dist out_adj = engine.ComputeStep(without, "").p_final;
    // Enumerate the four outcomes directly rather than via the library.
    const double d = oracle::Symmetric2(oracle::Coords(out_d), oracle::Coords(out_adj));
    worst_excess = std::max(worst_excess, d - 2.0 * beta);
  }
  return {worst_excess <= 1e-9,
          Fmt("20 scripted pairs on 4 tokens, max(D2 - alpha*beta) %.3g "
              "(limit 1e-9)",
              worst_excess)};
}

Verdict EpsilonFormulaRange() {
  const double low = TheoreticalEpsilon(0.01, 900, 8, RenyiOrder(2.0), 1e-5);
  const double high = TheoreticalEpsilon(0.10, 900, 8, RenyiOrder(2.0), 1e-5);
  const bool pass = low >= 15.9 && low <= 16.3 && high >= 64.5 && high <= 65.8;
  return {pass, Fmt("beta 0.01: %.4f in [15.9, 16.3]; beta 0.10: %.4f in "
                    "[64.5, 65.8]",
                    low, high)};
}

Verdict DataDependentDominance() {
  int checked = 0;
  double worst_gap = -INFINITY;
  for (const auto& t : g_transcripts) {
    const auto report = BuildReport(LedgerFromTranscript(t));
    for (const auto& g : report.groups) {
      worst_gap = std::max(worst_gap, g.eps_data - g.eps_theoretical);
      ++checked;
    }
  }
  AccountantLedger zero;
  zero.per_group_records[1] = std::vector<double>(900, 0.0);
  zero.betas[1] = 0.05;
  zero.tokens = 900;
  zero.groups = 8;
  const double eps_zero = DataDependentEpsilon(zero, 1);
  const bool exact = eps_zero == std::log(1.0 / 1e-5) / (2.0 - 1.0);
  return {checked > 0 && worst_gap <= 0.0 && exact,
          Fmt("%d group reports, max(eps_data - eps_theoretical) %.3g; "
              "zero ledger eps %.17g %s log(1/delta)",
              checked, worst_gap, eps_zero, exact ? "==" : "!=")};
}

double ChiSquareHomogeneityP(const std::vector<long>& a,
                             const std::vector<long>& b) {
  // Pool cells until every expected count reaches 5.
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto x, auto y) { return a[x] + b[x] > a[y] + b[y]; });
  std::vector<std::pair<double, double>> cells;
  double pa = 0.0, pb = 0.0;
  for (std::size_t idx : order) {
    pa += a[idx];
    pb += b[idx];
    const double tot = pa + pb;
    if (std::min(tot * na, tot * nb) / (na + nb) >= 5.0) {
      cells.emplace_back(pa, pb);
      pa = pb = 0.0;
    }
  }
  if (pa + pb > 0.0) {
    if (cells.empty()) return 1.0;
    cells.back().first += pa;
    cells.back().second += pb;
  }
  if (cells.size() < 2) return 1.0;
  double stat = 0.0;
  for (const auto& [ca, cb] : cells) {
    const double tot = ca + cb;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
  }
  boost::math::chi_squared chi(static_cast<double>(cells.size() - 1));
  return boost::math::cdf(boost::math::complement(chi, stat));
}

Verdict ZeroBudgetIndistinguishable() {
  MockConfig mock;
  mock.seed = 77;
  // A flatter mock spreads mass over many tokens, so the test has power.
  mock.logit_scale = 1.0;
  const MockModel model(mock);
  const PromptBundle bundle = PromptBundle::Default();
  const AnnotatedDocument doc = CaseDocument(3, 0.05);
  FusionConfig config;
  config.max_tokens = 1;
  config.per_group_budgets = {{1, 0.0}, {2, 0.0}, {3, 0.0}};

  const std::size_t v = model.vocab_size();
  std::vector<long> fused(v, 0), direct(v, 0);
  const Dist p_pub = ApplyProbabilityFloor(model.NextDistribution(
      AssemblePrompt(RenderView(doc, {}, bundle.placeholder), bundle), 1.0));
  for (int i = 0; i < 10000; ++i) {
    config.rng_seed = static_cast<std::uint64_t>(i);
    const FusionEngine engine(model, bundle, config);
    ++fused[engine.Generate(doc).output_tokens.at(0)];
    TokenSampler sampler(0x5EED0000ULL + i);
    ++direct[sampler.Sample(p_pub)];
  }
  const double p_value = ChiSquareHomogeneityP(fused, direct);

  // Token recovery against zero-budget releases.
  const std::vector<std::string> pool = {
      "Jan Novak", "Eva Horvath", "Luca Bianchi", "Sofia Petrova", "Tomas Berg",
      "Nina Weber", "Ivan Markov", "Clara Duval", "Peter Szabo", "Lena Fischer"};
  MockConfig attack_mock;
  attack_mock.seed = 78;
  const MockModel attack_model(attack_mock);
  std::vector<AttackInstance> instances;
  instances.reserve(5000);
  FusionConfig release;
  release.max_tokens = 6;
  release.per_group_budgets = config.per_group_budgets;
  for (int i = 0; i < 5000; ++i) {
    const AnnotatedDocument target = CaseDocument(i, 0.05);
    release.rng_seed = static_cast<std::uint64_t>(i);
    const auto t = FusionEngine(attack_model, bundle, release).Generate(target);
    std::string output = t.output_text.empty() ? "a" : t.output_text;
    instances.push_back({target, output,
                         BuildCandidateSet(target, 1, pool, 5, 9000 + i)});
  }
  const auto result = RunTokenRecovery(attack_model, instances, Scorer{}, bundle,
                                       4242, 4);
  boost::math::binomial binom(result.n, 0.2);
  const double successes = std::round(result.asr * result.n);
  const double tail =
      successes >= result.n * 0.2
          ? boost::math::cdf(boost::math::complement(binom, successes - 1))
          : boost::math::cdf(binom, successes);
  const double binom_p = std::min(1.0, 2.0 * tail);
  const bool pass = p_value > 0.01 && std::abs(result.advantage) <= 0.02 &&
                    result.n == 5000;
  return {pass, Fmt("chi-square p %.4f (> 0.01) over 10000 samples; advantage "
                    "%+.4f (|.| <= 0.02) at n=%d, binomial p %.3f",
                    p_value, result.advantage, result.n, binom_p)};
}

Verdict AttackCalibration() {
  MockConfig mock;
  mock.mode = MockMode::kUniform;
  const MockModel model(mock);
  const std::vector<std::string> pool = {"Jan Novak", "Eva Horvath",
                                         "Luca Bianchi", "Sofia Petrova",
                                         "Tomas Berg", "Nina Weber"};
  std::vector<AttackInstance> instances;
  instances.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    const AnnotatedDocument doc = CaseDocument(i, 0.05);
    instances.push_back({doc, "the applicant was detained.",
                         BuildCandidateSet(doc, 1, pool, 5, i)});
  }
  const auto result = RunTokenRecovery(model, instances, Scorer{},
                                       PromptBundle::Default(), 99, 4);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-15.0, -1e-3);
  double worst = 0.0;
  bool ppl_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> lp(1 + trial % 100);
    for (double& x : lp) x = u(rng);
    worst = std::max(worst, std::abs(MinKScore(lp, 100.0) + LossScore(lp)));
    ppl_exact &= Perplexity(lp) == std::exp(LossScore(lp));
  }
  const bool pass = std::abs(result.asr - 0.20) <= 0.015 && result.n == 10000 &&
                    worst <= 1e-12 && ppl_exact;
  return {pass, Fmt("uninformative ASR %.4f (0.20 +- 0.015, n=%d); "
                    "max |min_k(100) + loss| %.3g; perplexity == exp(loss): %s",
                    result.asr, result.n, worst, ppl_exact ? "yes" : "no")};
}

Verdict BaselineFormulas() {
  const double dec = DpDecodingEpsilon(0.5, 4, 1.0);
  const double prompt = DpPromptEpsilon(DpPromptConfig::FromWidth(5.0, 0.75), 1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 0.999);
  long below_floor = 0, coords = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 2 + trial * 5;
    const double lambda = unit(rng);
    const Dist out = DpDecodingStep(oracle::RandomDist(rng, v, 0.1), lambda, v);
    for (double p : out.probs()) {
      below_floor += p < (1.0 - lambda) / static_cast<double>(v);
      ++coords;
    }
  }
  const bool pass = std::abs(dec - std::log(4.0)) <= 1e-12 &&
                    std::abs(prompt - 40.0 / 3.0) <= 1e-12 && below_floor == 0;
  return {pass, Fmt("dp_decoding eps %.15f (log 4); dp_prompt eps %.15f (40/3); "
                    "%ld of %ld coordinates below (1-lambda)/V",
                    dec, prompt, below_floor, coords)};
}

Verdict CliDeterminism(const std::string& cli, const std::string& fixtures) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("dpfusion_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto run = [&](const std::string& out) {
    const std::string cmd =
        "\"" + cli + "\" privatize --doc \"" + fixtures +
        "/sample_document.json\" --budgets \"" + fixtures +
        "/budgets.json\" --mock-config \"" + fixtures +
        "/mock_ngram.json\" --tmax 80 --seed 1234 --out \"" + out + "\"";
    return std::system(cmd.c_str());
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const fs::path a = dir / "a.jsonl", b = dir / "b.jsonl";
  const int ra = run(a.string());
  const int rb = run(b.string());
  const std::string ta = slurp(a), tb = slurp(b);
  fs::remove_all(dir);
  const bool pass = ra == 0 && rb == 0 && !ta.empty() && ta == tb;
  return {pass, Fmt("exit codes %d/%d, %zu vs %zu bytes, %s", ra, rb, ta.size(),
                    tb.size(), ta == tb ? "identical" : "different")};
}

}  // namespace
}  // namespace dpfusion

int main(int argc, char** argv) {
  std::string cli = DPFUSION_CLI_PATH;
  std::string fixtures = DPFUSION_FIXTURES_DIR;
  if (argc > 1) cli = argv[1];
  if (argc > 2) fixtures = argv[2];

  using dpfusion::Verdict;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"divergence_paths_agree", dpfusion::DivergencePathsAgree},
      {"mixture_divergence_monotone", dpfusion::MixtureMonotone},
      {"bisection_matches_grid_oracle", dpfusion::BisectionMatchesGrid},
      {"per_step_budget_never_exceeded", dpfusion::PerStepBudgetRespected},
      {"single_step_mechanism_bound", dpfusion::SingleStepMechanism},
      {"theoretical_epsilon_range", dpfusion::EpsilonFormulaRange},
      {"data_dependent_epsilon_dominance", dpfusion::DataDependentDominance},
      {"zero_budget_indistinguishable", dpfusion::ZeroBudgetIndistinguishable},
      {"attack_harness_calibration", dpfusion::AttackCalibration},
      {"baseline_formulas", dpfusion::BaselineFormulas},
      {"privatize_cli_deterministic",
       [&] { return dpfusion::CliDeterminism(cli, fixtures); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
