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

#include "dpfusion/mock_backend.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform on (0, 1), never exactly 0.
double UnitInterval(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

Dist Retemper(const Dist& dist, double temperature) {
  if (temperature == 1.0) return dist;
  const Dist floored = ApplyProbabilityFloor(dist);
  std::vector<double> logits(floored.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = std::log(floored[i]);
  }
  return SoftmaxWithTemperature(LogitVector(std::move(logits)), temperature);
}

MockMode ParseMode(const std::string& name) {
  if (name == "uniform") return MockMode::kUniform;
  if (name == "table") return MockMode::kTable;
  if (name == "ngram") return MockMode::kNgram;
  throw Error(ErrorCode::kInvalidInput, "unknown mock mode '" + name + "'");
}

}  // namespace

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<std::string> DefaultMockVocabulary() {
  std::vector<std::string> vocab;
  for (char c = 'a'; c <= 'z'; ++c) vocab.emplace_back(1, c);
  for (const char* piece : {" ", ".", ",", "\n"}) vocab.emplace_back(piece);
  vocab.emplace_back("<eos>");
  return vocab;
}

MockConfig ParseMockConfig(std::string_view text) {
  MockConfig config;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("mode")) config.mode = ParseMode(j["mode"].get<std::string>());
    config.vocab = j.value("vocab", config.vocab);
    config.eos_token = j.value("eos", config.eos_token);
    config.seed = j.value("seed", config.seed);
    config.window = j.value("window", config.window);
    config.logit_scale = j.value("scale", config.logit_scale);
    config.eos_bias = j.value("eos_bias", config.eos_bias);
    if (j.contains("script")) {
      for (const auto& [context, probs] : j["script"].items()) {
        config.script[context] = probs.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("bad mock config: ") + e.what());
  }
  return config;
}

MockModel::MockModel(MockConfig config)
    : config_(std::move(config)),
      vocab_(config_.vocab.empty() ? DefaultMockVocabulary() : config_.vocab),
      eos_token_(config_.eos_token < 0 ? static_cast<int>(vocab_.size()) - 1
                                       : config_.eos_token),
      by_first_byte_(256) {
  if (eos_token_ >= static_cast<int>(vocab_.size())) {
    throw Error(ErrorCode::kInvalidInput, "terminator outside vocabulary");
  }
  for (const auto& [context, probs] : config_.script) {
    if (probs.size() != vocab_.size()) {
      throw Error(ErrorCode::kInvalidInput,
                  "scripted distribution has wrong vocabulary size");
    }
    script_.emplace(context, Dist::FromProbabilities(probs));
  }
  std::vector<double> unigram(vocab_.size());
  for (std::size_t i = 0; i < unigram.size(); ++i) {
    unigram[i] = 1.0 + static_cast<double>(SplitMix64(config_.seed + i) % 100) /
                           100.0;
  }
  fallback_ = Dist::Normalized(std::move(unigram));

  for (std::size_t id = 0; id < vocab_.size(); ++id) {
    if (vocab_[id].empty()) {
      throw Error(ErrorCode::kInvalidInput, "empty vocabulary entry");
    }
    by_first_byte_[static_cast<unsigned char>(vocab_[id][0])].push_back(
        static_cast<int>(id));
  }
  for (auto& ids : by_first_byte_) {
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      return vocab_[a].size() > vocab_[b].size();
    });
  }
}

LogitVector MockModel::HashedLogits(std::string_view context) const {
  const std::string_view key =
      config_.window == 0 || context.size() <= config_.window
          ? context
          : context.substr(context.size() - config_.window);
  const std::uint64_t base = Fnv1a64(key) ^ SplitMix64(config_.seed);
  std::vector<double> logits(vocab_.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    // Box-Muller on two hashed uniforms.
    const double u1 = UnitInterval(SplitMix64(base + 2 * i));
    const double u2 = UnitInterval(SplitMix64(base + 2 * i + 1));
    const double normal = std::sqrt(-2.0 * std::log(u1)) *
                          std::cos(2.0 * std::numbers::pi * u2);
    logits[i] = config_.logit_scale * normal;
  }
  logits[eos_token_] += config_.eos_bias;
  return LogitVector(std::move(logits));
}

Dist MockModel::NextDistribution(std::string_view context,
                                 double temperature) const {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "temperature must be > 0");
  }
  switch (config_.mode) {
    case MockMode::kUniform:
      return Dist::Uniform(vocab_.size());
    case MockMode::kTable: {
      const auto it = script_.find(std::string(context));
      return Retemper(it == script_.end() ? fallback_ : it->second,
                      temperature);
    }
    case MockMode::kNgram:
      return SoftmaxWithTemperature(HashedLogits(context), temperature);
  }
  throw Error(ErrorCode::kInvalidInput, "bad mock mode");
}

LogitVector MockModel::NextLogits(std::string_view context) const {
  switch (config_.mode) {
    case MockMode::kUniform:
      return LogitVector(std::vector<double>(vocab_.size(), 0.0));
    case MockMode::kTable: {
      const auto it = script_.find(std::string(context));
      const Dist floored =
          ApplyProbabilityFloor(it == script_.end() ? fallback_ : it->second);
      std::vector<double> logits(floored.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] = std::log(floored[i]);
      }
      return LogitVector(std::move(logits));
    }
    case MockMode::kNgram:
      return HashedLogits(context);
  }
  throw Error(ErrorCode::kInvalidInput, "bad mock mode");
}

std::vector<int> MockModel::Tokenize(std::string_view text) const {
  std::vector<int> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    int match = -1;
    for (int id : by_first_byte_[static_cast<unsigned char>(text[i])]) {
      if (text.compare(i, vocab_[id].size(), vocab_[id]) == 0) {
        match = id;
        break;
      }
    }
    if (match < 0) {
      throw Error(ErrorCode::kInvalidInput,
                  "mock vocabulary cannot tokenize byte at offset " +
                      std::to_string(i));
    }
    tokens.push_back(match);
    i += vocab_[match].size();
  }
  return tokens;
}

std::vector<double> MockModel::ScoreContinuation(
    std::string_view context, std::string_view continuation) const {
  std::vector<double> logprobs;
  std::string prefix(context);
  for (int token : Tokenize(continuation)) {
    logprobs.push_back(std::log(NextDistribution(prefix, 1.0)[token]));
    prefix += vocab_[token];
  }
  return logprobs;
}

std::string MockModel::TokenText(int token) const {
  if (token < 0 || token >= static_cast<int>(vocab_.size())) {
    throw Error(ErrorCode::kInvalidInput,
                "token id out of range: " + std::to_string(token));
  }
  return vocab_[token];
}

}  // namespace dpfusion
