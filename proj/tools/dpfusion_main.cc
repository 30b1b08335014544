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

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "dpfusion/accountant.h"
#include "dpfusion/attacks.h"
#include "dpfusion/baselines.h"
#include "dpfusion/document.h"
#include "dpfusion/error.h"
#include "dpfusion/fusion.h"
#include "dpfusion/mock_backend.h"
#include "dpfusion/remote_backend.h"
#include "dpfusion/transcript.h"

namespace {

using dpfusion::Error;
using dpfusion::ErrorCode;

constexpr int kExitInput = 1;
constexpr int kExitBackend = 2;
constexpr int kExitInvalidTranscript = 3;

struct BackendOptions {
  std::string spec = "mock";
  std::string mock_config;
  std::string mock_mode = "ngram";
  std::uint64_t mock_seed = 0;
  std::size_t mock_window = 0;
  int timeout_ms = 30000;
  int retries = 2;
  std::size_t pool_size = 4;
  bool logprobs = false;
};

struct TemplateOptions {
  std::string path;
  std::string placeholder;
};

void AddBackendOptions(CLI::App* cmd, BackendOptions& o) {
  cmd->add_option("--backend", o.spec, "mock or remote:HOST:PORT")
      ->capture_default_str();
  cmd->add_option("--mock-config", o.mock_config, "JSON mock definition");
  cmd->add_option("--mock-mode", o.mock_mode, "uniform, table or ngram")
      ->capture_default_str();
  cmd->add_option("--mock-seed", o.mock_seed)->capture_default_str();
  cmd->add_option("--mock-window", o.mock_window,
                  "context bytes hashed by the ngram mock; 0 = all")
      ->capture_default_str();
  cmd->add_option("--timeout-ms", o.timeout_ms)->capture_default_str();
  cmd->add_option("--retries", o.retries)->capture_default_str();
  cmd->add_option("--pool-size", o.pool_size)->capture_default_str();
  cmd->add_flag("--logprobs", o.logprobs,
                "request log-probabilities from a remote backend");
}

void AddTemplateOptions(CLI::App* cmd, TemplateOptions& o) {
  cmd->add_option("--template", o.path, "JSON prompt template");
  cmd->add_option("--placeholder", o.placeholder, "redaction placeholder");
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + path);
  out << text;
}

dpfusion::MockConfig MockConfigFrom(const BackendOptions& o) {
  dpfusion::MockConfig config;
  if (!o.mock_config.empty()) {
    config = dpfusion::ParseMockConfig(ReadFile(o.mock_config));
  } else {
    nlohmann::json j = {{"mode", o.mock_mode}};
    config = dpfusion::ParseMockConfig(j.dump());
    config.seed = o.mock_seed;
    config.window = o.mock_window;
  }
  return config;
}

std::unique_ptr<dpfusion::DistributionProvider> MakeBackend(
    const BackendOptions& o) {
  if (o.spec == "mock") {
    return std::make_unique<dpfusion::MockModel>(MockConfigFrom(o));
  }
  const std::string prefix = "remote:";
  if (o.spec.rfind(prefix, 0) == 0) {
    dpfusion::RemoteBackendConfig base;
    base.timeout_ms = o.timeout_ms;
    base.retries = o.retries;
    base.pool_size = o.pool_size;
    base.logprobs = o.logprobs;
    if (const char* token = std::getenv(dpfusion::kAuthTokenEnv)) {
      base.auth_token = token;
    }
    return std::make_unique<dpfusion::RemoteBackend>(
        dpfusion::ParseEndpoint(o.spec.substr(prefix.size()), base));
  }
  throw Error(ErrorCode::kInvalidInput, "unknown backend '" + o.spec + "'");
}

dpfusion::PromptBundle BundleFrom(const TemplateOptions& o) {
  dpfusion::PromptBundle bundle = o.path.empty()
                                      ? dpfusion::PromptBundle::Default()
                                      : dpfusion::LoadPromptBundle(o.path);
  if (!o.placeholder.empty()) bundle.placeholder = o.placeholder;
  return bundle;
}

dpfusion::AnnotatedDocument SelectDocument(const std::string& path,
                                           const std::string& doc_id) {
  auto docs = dpfusion::LoadDocuments(path);
  if (docs.empty()) throw Error(ErrorCode::kInvalidInput, "no documents in " + path);
  if (doc_id.empty()) return docs.front();
  for (auto& doc : docs) {
    if (doc.doc_id() == doc_id) return doc;
  }
  throw Error(ErrorCode::kInvalidInput, "no document with id " + doc_id);
}

// "0.05" applies to every group; "1:0.01,2:0.05" sets groups individually;
// anything naming a readable file is read as {"1": 0.01, ...}.
std::map<int, double> ParseBudgets(const std::string& spec,
                                   const dpfusion::AnnotatedDocument& doc) {
  std::map<int, double> budgets;
  if (spec.empty()) return budgets;
  if (std::ifstream probe(spec); probe) {
    try {
      const auto j = nlohmann::json::parse(ReadFile(spec));
      for (const auto& [key, value] : j.items()) {
        budgets[std::stoi(key)] = value.get<double>();
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kInvalidInput,
                  "bad budget file " + spec + ": " + e.what());
    }
    return budgets;
  }
  try {
    if (spec.find(':') == std::string::npos) {
      const double beta = std::stod(spec);
      for (const auto& g : doc.groups()) budgets[g.id] = beta;
      return budgets;
    }
    std::stringstream items(spec);
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw std::invalid_argument(item);
      budgets[std::stoi(item.substr(0, colon))] =
          std::stod(item.substr(colon + 1));
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidInput, "bad budget spec '" + spec + "'");
  }
  return budgets;
}

dpfusion::Composition ParseComposition(const std::string& name) {
  if (name == "sum") return dpfusion::Composition::kSum;
  if (name == "max") return dpfusion::Composition::kRunningMax;
  throw Error(ErrorCode::kInvalidInput, "composition must be sum or max");
}

int EmitTranscript(const dpfusion::FusionTranscript& transcript,
                   const std::string& out) {
  if (!transcript.valid) {
    std::cerr << "dpfusion: generation aborted, nothing written: "
              << transcript.error << "\n";
    return kExitInvalidTranscript;
  }
  WriteOutput(out, dpfusion::TranscriptToJsonl(transcript));
  return 0;
}

struct PrivatizeOptions {
  std::string doc;
  std::string doc_id;
  std::string budgets;
  double max_divergence = -1.0;
  double alpha = 2.0;
  int tmax = dpfusion::kDefaultMaxTokens;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  double tolerance = dpfusion::kDefaultBisectionTolerance;
  std::string out;
};

int RunPrivatize(const PrivatizeOptions& o, const BackendOptions& b,
                 const TemplateOptions& t) {
  const auto doc = SelectDocument(o.doc, o.doc_id);
  dpfusion::FusionConfig config;
  config.max_tokens = o.tmax;
  config.order = dpfusion::RenyiOrder(o.alpha);
  config.temperature = o.temperature;
  config.rng_seed = o.seed;
  config.bisection_tolerance = o.tolerance;
  config.per_group_budgets = ParseBudgets(o.budgets, doc);
  if (o.max_divergence >= 0.0) {
    // Same bound alpha * beta for every group.
    for (const auto& g : doc.groups()) {
      config.per_group_budgets[g.id] = o.max_divergence / o.alpha;
    }
  }
  const auto backend = MakeBackend(b);
  const dpfusion::FusionEngine engine(*backend, BundleFrom(t), config);
  return EmitTranscript(engine.Generate(doc), o.out);
}

struct BaselineOptions {
  std::string doc;
  std::string doc_id;
  std::string mode = "original_doc";
  double lambda = 0.5;
  double width = -1.0;
  double clip_min = -2.5;
  double clip_max = 2.5;
  double prompt_temperature = 1.0;
  double temperature = 1.0;
  int tmax = dpfusion::kDefaultMaxTokens;
  std::uint64_t seed = 0;
  std::string out;
};

int RunBaseline(const BaselineOptions& o, const BackendOptions& b,
                const TemplateOptions& t) {
  const auto doc = SelectDocument(o.doc, o.doc_id);
  dpfusion::BaselineConfig config;
  config.mode = dpfusion::ParseBaselineMode(o.mode);
  config.max_tokens = o.tmax;
  config.temperature = o.temperature;
  config.rng_seed = o.seed;
  config.dp_decoding.lambda_interp = o.lambda;
  config.dp_decoding.temperature = o.temperature;
  config.dp_prompt =
      o.width >= 0.0
          ? dpfusion::DpPromptConfig::FromWidth(o.width, o.prompt_temperature)
          : dpfusion::DpPromptConfig{o.clip_min, o.clip_max,
                                     o.prompt_temperature};
  const auto backend = MakeBackend(b);
  return EmitTranscript(
      dpfusion::BaselineGenerate(*backend, doc, BundleFrom(t), config), o.out);
}

struct AccountOptions {
  std::string transcript;
  double delta = dpfusion::kDefaultDelta;
  std::string composition = "sum";
  std::string out;
  std::string plot_csv;
};

int RunAccount(const AccountOptions& o) {
  const auto transcript = dpfusion::LoadTranscript(o.transcript);
  const auto ledger = dpfusion::LedgerFromTranscript(transcript, o.delta);
  const auto composition = ParseComposition(o.composition);
  WriteOutput(o.out, dpfusion::ReportToJson(
                         dpfusion::BuildReport(ledger, composition)) +
                         "\n");
  if (!o.plot_csv.empty()) {
    WriteOutput(o.plot_csv, dpfusion::EpsilonCurveCsv(
                                dpfusion::EpsilonCurve(ledger, composition)));
  }
  return 0;
}

struct TraceOptions {
  std::string transcript;
  std::string plot_csv;
  std::size_t window = 20;
  // Optional lambda sweep of the first step of a fresh run.
  double sweep_step = 0.0;
  std::string doc;
  std::string doc_id;
  double alpha = 2.0;
};

std::string TraceCsv(const dpfusion::FusionTranscript& transcript,
                     std::size_t window) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,group,lambda,divergence,divergence_ma,bound\n";
  std::map<int, double> bounds;
  for (const auto& b : transcript.config_echo.budgets) bounds[b.id] = b.bound;
  std::map<int, std::vector<double>> history;
  for (const auto& step : transcript.steps) {
    for (const auto& [id, outcome] : step.per_group) {
      auto& h = history[id];
      h.push_back(outcome.achieved_divergence);
      const std::size_t n = std::min(window, h.size());
      double sum = 0.0;
      for (std::size_t k = h.size() - n; k < h.size(); ++k) sum += h[k];
      out << step.step_index << ',' << id << ',' << outcome.lambda << ','
          << outcome.achieved_divergence << ',' << sum / n << ','
          << bounds[id] << '\n';
    }
  }
  return out.str();
}

std::string SweepCsv(const dpfusion::AnnotatedDocument& doc,
                     const dpfusion::DistributionProvider& backend,
                     const dpfusion::PromptBundle& bundle, double step,
                     double alpha) {
  dpfusion::FusionConfig config;
  config.order = dpfusion::RenyiOrder(alpha);
  const dpfusion::FusionEngine engine(backend, bundle, config);
  const auto dists = engine.ComputeStep(doc, "");
  std::ostringstream out;
  out << std::setprecision(17) << "lambda,group,divergence\n";
  const int points = static_cast<int>(std::round(1.0 / step));
  for (std::size_t i = 0; i < dists.p_priv.size(); ++i) {
    for (int k = 0; k <= points; ++k) {
      const double lambda = std::min(1.0, k * step);
      out << lambda << ',' << doc.groups()[i].id << ','
          << dpfusion::SymmetricRenyi(
                 dpfusion::Mix(lambda, dists.p_priv[i], dists.p_pub),
                 dists.p_pub, config.order)
          << '\n';
    }
  }
  return out.str();
}

int RunTrace(const TraceOptions& o, const BackendOptions& b,
             const TemplateOptions& t) {
  if (o.window == 0) throw Error(ErrorCode::kInvalidInput, "window must be >= 1");
  if (o.sweep_step > 0.0) {
    if (o.doc.empty()) {
      throw Error(ErrorCode::kInvalidInput, "--sweep-step needs --doc");
    }
    const auto backend = MakeBackend(b);
    WriteOutput(o.plot_csv, SweepCsv(SelectDocument(o.doc, o.doc_id), *backend,
                                     BundleFrom(t), o.sweep_step, o.alpha));
    return 0;
  }
  if (o.transcript.empty()) {
    throw Error(ErrorCode::kInvalidInput, "--transcript is required");
  }
  WriteOutput(o.plot_csv, TraceCsv(dpfusion::LoadTranscript(o.transcript),
                                   o.window));
  return 0;
}

struct AttackOptions {
  std::string instances;
  std::string scorer = "loss";
  double k = 20.0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

int RunAttack(const AttackOptions& o, const BackendOptions& b,
              const TemplateOptions& t) {
  const auto instances = dpfusion::LoadAttackInstances(o.instances);
  dpfusion::Scorer scorer;
  if (o.scorer == "loss") {
    scorer.kind = dpfusion::ScorerKind::kLoss;
  } else if (o.scorer == "mink") {
    scorer.kind = dpfusion::ScorerKind::kMinK;
  } else {
    throw Error(ErrorCode::kInvalidInput, "scorer must be loss or mink");
  }
  scorer.k_percent = o.k;
  const auto backend = MakeBackend(b);
  const auto result = dpfusion::RunTokenRecovery(
      *backend, instances, scorer, BundleFrom(t), o.seed, o.threads);
  WriteOutput(o.out, dpfusion::AttackSummaryJson(result) + "\n");
  return 0;
}

struct InstanceOptions {
  std::string doc;
  std::string doc_id;
  std::string transcript;
  std::string pool;
  int group = 1;
  std::size_t size = dpfusion::kDefaultCandidateCount;
  std::uint64_t seed = 0;
  std::string out;
  bool append = false;
};

int RunMakeInstances(const InstanceOptions& o) {
  const auto doc = SelectDocument(o.doc, o.doc_id);
  const auto transcript = dpfusion::LoadTranscript(o.transcript);
  std::vector<std::string> pool;
  std::istringstream lines(ReadFile(o.pool));
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) pool.push_back(line);
  }
  dpfusion::AttackInstance instance{
      doc, transcript.output_text,
      dpfusion::BuildCandidateSet(doc, o.group, pool, o.size, o.seed)};
  const std::string line = dpfusion::AttackInstanceToJson(instance) + "\n";
  if (o.append && !o.out.empty() && o.out != "-") {
    std::ofstream out(o.out, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + o.out);
    out << line;
    return 0;
  }
  WriteOutput(o.out, line);
  return 0;
}

struct ServeOptions {
  std::string listen = "127.0.0.1:0";
  std::string model = "mock";
};

int RunServeMock(const ServeOptions& o, const BackendOptions& b) {
  // Block the stop signals before any server thread exists so only
  // sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const dpfusion::MockModel model(MockConfigFrom(b));
  const auto endpoint = dpfusion::ParseEndpoint(o.listen);
  std::string auth;
  if (const char* token = std::getenv(dpfusion::kAuthTokenEnv)) auth = token;
  dpfusion::ProtocolServer server(model, endpoint.host, endpoint.port, auth,
                                  o.model);
  std::cout << endpoint.host << ':' << server.port() << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  server.Stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private document paraphrasing engine"};
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
  app.require_subcommand(1);

  BackendOptions backend;
  TemplateOptions templ;

  PrivatizeOptions privatize;
  auto* p = app.add_subcommand("privatize", "Paraphrase a document under per-group budgets");
  p->add_option("--doc", privatize.doc, "document JSON or JSONL")->required();
  p->add_option("--doc-id", privatize.doc_id, "document to pick from a JSONL file");
  p->add_option("--budgets", privatize.budgets,
                "beta for all groups, id:beta list, or JSON file");
  p->add_option("--max-divergence", privatize.max_divergence,
                "per-step bound alpha*beta applied to every group");
  p->add_option("--alpha", privatize.alpha)->capture_default_str();
  p->add_option("--tmax", privatize.tmax)->capture_default_str();
  p->add_option("--seed", privatize.seed)->capture_default_str();
  p->add_option("--temperature", privatize.temperature)->capture_default_str();
  p->add_option("--tolerance", privatize.tolerance)->capture_default_str();
  p->add_option("--out", privatize.out, "transcript JSONL; stdout if omitted");
  AddBackendOptions(p, backend);
  AddTemplateOptions(p, templ);

  AccountOptions account;
  auto* a = app.add_subcommand("account", "Privacy report for a transcript");
  a->add_option("--transcript", account.transcript)->required();
  a->add_option("--delta", account.delta)->capture_default_str();
  a->add_option("--composition", account.composition, "sum or max")
      ->capture_default_str();
  a->add_option("--out", account.out, "report JSON; stdout if omitted");
  a->add_option("--plot-csv", account.plot_csv, "cumulative epsilon per step");

  AttackOptions attack;
  auto* k = app.add_subcommand("attack", "Token-recovery attack over instances");
  k->add_option("--instances", attack.instances)->required();
  k->add_option("--scorer", attack.scorer, "loss or mink")->capture_default_str();
  k->add_option("--k", attack.k, "percent of tokens for mink")->capture_default_str();
  k->add_option("--seed", attack.seed)->capture_default_str();
  k->add_option("--threads", attack.threads)->capture_default_str();
  k->add_option("--out", attack.out);
  AddBackendOptions(k, backend);
  AddTemplateOptions(k, templ);

  BaselineOptions baseline;
  auto* s = app.add_subcommand("baseline", "Generate with a comparison method");
  s->add_option("--doc", baseline.doc)->required();
  s->add_option("--doc-id", baseline.doc_id);
  s->add_option("--mode", baseline.mode,
                "original_doc, ner_public, dp_decoding or dp_prompt")
      ->capture_default_str();
  s->add_option("--lambda", baseline.lambda, "dp_decoding interpolation weight")
      ->capture_default_str();
  s->add_option("--width", baseline.width, "dp_prompt symmetric clipping width");
  s->add_option("--clip-min", baseline.clip_min)->capture_default_str();
  s->add_option("--clip-max", baseline.clip_max)->capture_default_str();
  s->add_option("--prompt-temperature", baseline.prompt_temperature,
                "dp_prompt softmax temperature")
      ->capture_default_str();
  s->add_option("--temperature", baseline.temperature)->capture_default_str();
  s->add_option("--tmax", baseline.tmax)->capture_default_str();
  s->add_option("--seed", baseline.seed)->capture_default_str();
  s->add_option("--out", baseline.out);
  AddBackendOptions(s, backend);
  AddTemplateOptions(s, templ);

  TraceOptions trace;
  auto* d = app.add_subcommand("divergence-trace",
                               "Per-step lambda and divergence as CSV");
  d->add_option("--transcript", trace.transcript);
  d->add_option("--plot-csv", trace.plot_csv, "CSV path; stdout if omitted");
  d->add_option("--window", trace.window, "moving-average window")
      ->capture_default_str();
  d->add_option("--sweep-step", trace.sweep_step,
                "sweep lambda over [0, 1] at the first step of --doc");
  d->add_option("--doc", trace.doc);
  d->add_option("--doc-id", trace.doc_id);
  d->add_option("--alpha", trace.alpha)->capture_default_str();
  AddBackendOptions(d, backend);
  AddTemplateOptions(d, templ);

  InstanceOptions instances;
  auto* m = app.add_subcommand("make-instances",
                               "Build an attack instance from a transcript");
  m->add_option("--doc", instances.doc)->required();
  m->add_option("--doc-id", instances.doc_id);
  m->add_option("--transcript", instances.transcript)->required();
  m->add_option("--pool", instances.pool, "decoy strings, one per line")
      ->required();
  m->add_option("--group", instances.group)->capture_default_str();
  m->add_option("--size", instances.size)->capture_default_str();
  m->add_option("--seed", instances.seed)->capture_default_str();
  m->add_option("--out", instances.out);
  m->add_flag("--append", instances.append);

  ServeOptions serve;
  auto* v = app.add_subcommand("serve-mock",
                               "Serve the mock model over the wire protocol");
  v->add_option("--listen", serve.listen, "HOST:PORT; port 0 picks one")
      ->capture_default_str();
  v->add_option("--model-name", serve.model)->capture_default_str();
  AddBackendOptions(v, backend);

  CLI11_PARSE(app, argc, argv);

  try {
    if (p->parsed()) return RunPrivatize(privatize, backend, templ);
    if (a->parsed()) return RunAccount(account);
    if (k->parsed()) return RunAttack(attack, backend, templ);
    if (s->parsed()) return RunBaseline(baseline, backend, templ);
    if (d->parsed()) return RunTrace(trace, backend, templ);
    if (m->parsed()) return RunMakeInstances(instances);
    if (v->parsed()) return RunServeMock(serve, backend);
  } catch (const Error& e) {
    std::cerr << "dpfusion: " << e.what() << "\n";
    return e.code() == ErrorCode::kTransport ||
                   e.code() == ErrorCode::kMalformedResponse
               ? kExitBackend
               : kExitInput;
  }
  return 0;
}
