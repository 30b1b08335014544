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

#include "dpfusion/transcript.h"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

using nlohmann::json;

json EchoToJson(const RunEcho& echo) {
  json budgets = json::array();
  for (const GroupBudget& b : echo.budgets) {
    budgets.push_back({{"id", b.id}, {"beta", b.beta}, {"bound", b.bound}});
  }
  return {{"mode", echo.mode},
          {"doc_id", echo.doc_id},
          {"max_tokens", echo.max_tokens},
          {"alpha", echo.alpha},
          {"temperature", echo.temperature},
          {"seed", echo.seed},
          {"tolerance", echo.tolerance},
          {"groups", echo.budgets.size()},
          {"budgets", budgets},
          {"params", echo.params}};
}

RunEcho EchoFromJson(const json& j) {
  RunEcho echo;
  echo.mode = j.at("mode").get<std::string>();
  echo.doc_id = j.value("doc_id", std::string());
  echo.max_tokens = j.at("max_tokens").get<int>();
  echo.alpha = j.at("alpha").get<double>();
  echo.temperature = j.at("temperature").get<double>();
  echo.seed = j.at("seed").get<std::uint64_t>();
  echo.tolerance = j.value("tolerance", kDefaultBisectionTolerance);
  for (const auto& b : j.at("budgets")) {
    echo.budgets.push_back({b.at("id").get<int>(), b.at("beta").get<double>(),
                            b.at("bound").get<double>()});
  }
  echo.params = j.value("params", std::map<std::string, double>());
  return echo;
}

}  // namespace

std::string TranscriptToJsonl(const FusionTranscript& transcript) {
  if (!transcript.valid) {
    throw Error(ErrorCode::kInvalidInput,
                "refusing to serialize an invalid transcript: " +
                    transcript.error);
  }
  std::string out;
  for (const StepRecord& step : transcript.steps) {
    json groups = json::array();
    for (const auto& [id, outcome] : step.per_group) {
      groups.push_back({{"id", id},
                        {"lambda", outcome.lambda},
                        {"div", outcome.achieved_divergence}});
    }
    json line = {{"t", step.step_index},
                 {"token", step.chosen_token},
                 {"text_piece", step.text_piece},
                 {"groups", groups}};
    if (!step.per_group.empty()) line["fused_div"] = step.fused_divergence;
    out += line.dump();
    out += '\n';
  }
  const json final_line = {{"final", true},
                           {"output_text", transcript.output_text},
                           {"output_tokens", transcript.output_tokens},
                           {"config", EchoToJson(transcript.config_echo)}};
  out += final_line.dump();
  out += '\n';
  return out;
}

FusionTranscript TranscriptFromJsonl(std::string_view jsonl) {
  FusionTranscript transcript;
  bool saw_final = false;
  std::istringstream lines{std::string(jsonl)};
  std::string line;
  try {
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (saw_final) {
        throw Error(ErrorCode::kInvalidInput, "data after the final line");
      }
      const json j = json::parse(line);
      if (j.value("final", false)) {
        transcript.output_text = j.at("output_text").get<std::string>();
        transcript.output_tokens =
            j.at("output_tokens").get<std::vector<int>>();
        transcript.config_echo = EchoFromJson(j.at("config"));
        saw_final = true;
        continue;
      }
      StepRecord step;
      step.step_index = j.at("t").get<int>();
      step.chosen_token = j.at("token").get<int>();
      step.text_piece = j.at("text_piece").get<std::string>();
      step.fused_divergence = j.value("fused_div", 0.0);
      for (const auto& g : j.at("groups")) {
        MollificationOutcome outcome;
        outcome.lambda = g.at("lambda").get<double>();
        outcome.achieved_divergence = g.at("div").get<double>();
        outcome.saturated = outcome.lambda < 1.0;
        step.per_group[g.at("id").get<int>()] = outcome;
      }
      transcript.steps.push_back(std::move(step));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("bad transcript line: ") + e.what());
  }
  if (!saw_final) {
    throw Error(ErrorCode::kInvalidInput, "transcript has no final line");
  }
  if (transcript.output_tokens.size() != transcript.steps.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "step count does not match output token count");
  }
  return transcript;
}

FusionTranscript LoadTranscript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return TranscriptFromJsonl(buffer.str());
}

}  // namespace dpfusion
