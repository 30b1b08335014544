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

#include "dpfusion/wire_protocol.h"

#include <sys/socket.h>
#include <sys/types.h>

#include <algorithm>
#include <cerrno>
#include <cfloat>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion::wire {
namespace {

using nlohmann::json;

[[noreturn]] void TransportFailure(const std::string& what) {
  throw Error(ErrorCode::kTransport, what + ": " + std::strerror(errno));
}

json ErrorResponse(ErrorCode code, const std::string& message) {
  return {{"version", kProtocolVersion},
          {"error",
           {{"code", std::string(ErrorCodeName(code))}, {"message", message}}}};
}

std::vector<std::string> RequestContexts(const json& request) {
  auto contexts = request.at("contexts").get<std::vector<std::string>>();
  if (contexts.empty()) {
    throw Error(ErrorCode::kInvalidInput, "request has no contexts");
  }
  return contexts;
}

json Dispatch(const DistributionProvider& provider, const json& request,
              const std::string& model_name) {
  const std::string op = request.at("op").get<std::string>();
  json response = {{"version", kProtocolVersion}};
  if (op == "info") {
    const BackendCapabilities caps = provider.capabilities();
    response["vocab_size"] = provider.vocab_size();
    response["eos_token"] = provider.eos_token();
    response["model"] = model_name;
    response["capabilities"] = {{"next_dist", caps.next_dist},
                                {"teacher_force_score", caps.teacher_force_score},
                                {"batched", caps.batched},
                                {"logits", caps.logits}};
    return response;
  }
  if (op == "next_dist" || op == "batch_next_dist") {
    const auto contexts = RequestContexts(request);
    if (op == "next_dist" && contexts.size() != 1) {
      throw Error(ErrorCode::kInvalidInput,
                  "next_dist takes exactly one context");
    }
    const double temperature = request.value("temperature", 1.0);
    const bool as_logprobs = request.value("logprobs", false);
    json dists = json::array();
    for (const Dist& d :
         provider.NextDistributionBatch(contexts, temperature)) {
      dists.push_back(EncodeDist(d, as_logprobs));
    }
    response["vocab_size"] = provider.vocab_size();
    response["dists"] = std::move(dists);
    response["logprobs"] = as_logprobs;
    return response;
  }
  if (op == "score") {
    const auto contexts = RequestContexts(request);
    response["logprobs"] = provider.ScoreContinuation(
        contexts.front(), request.at("continuation").get<std::string>());
    return response;
  }
  if (op == "next_logits") {
    json logits = json::array();
    for (const std::string& context : RequestContexts(request)) {
      const LogitVector z = provider.NextLogits(context);
      logits.push_back(std::vector<double>(z.values().begin(), z.values().end()));
    }
    response["vocab_size"] = provider.vocab_size();
    response["logits"] = std::move(logits);
    return response;
  }
  if (op == "detokenize") {
    json pieces = json::array();
    for (int token : request.at("tokens").get<std::vector<int>>()) {
      pieces.push_back(provider.TokenText(token));
    }
    response["pieces"] = std::move(pieces);
    return response;
  }
  throw Error(ErrorCode::kUnsupported, "unknown op '" + op + "'");
}

}  // namespace

void WriteFrame(int fd, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) {
    throw Error(ErrorCode::kTransport, "frame too large");
  }
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string frame(4 + payload.size(), '\0');
  frame[0] = static_cast<char>((n >> 24) & 0xFF);
  frame[1] = static_cast<char>((n >> 16) & 0xFF);
  frame[2] = static_cast<char>((n >> 8) & 0xFF);
  frame[3] = static_cast<char>(n & 0xFF);
  std::memcpy(frame.data() + 4, payload.data(), payload.size());
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t k =
        ::send(fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      TransportFailure("send failed");
    }
    sent += static_cast<std::size_t>(k);
  }
}

std::string ReadFrame(int fd) {
  const auto read_exact = [fd](char* out, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t k = ::recv(fd, out + got, n - got, 0);
      if (k == 0) {
        throw Error(ErrorCode::kTransport, "connection closed by peer");
      }
      if (k < 0) {
        if (errno == EINTR) continue;
        TransportFailure("recv failed");
      }
      got += static_cast<std::size_t>(k);
    }
  };
  unsigned char header[4];
  read_exact(reinterpret_cast<char*>(header), 4);
  const std::size_t n = (std::size_t{header[0]} << 24) |
                        (std::size_t{header[1]} << 16) |
                        (std::size_t{header[2]} << 8) | std::size_t{header[3]};
  if (n > kMaxFrameBytes) throw Error(ErrorCode::kTransport, "frame too large");
  std::string payload(n, '\0');
  read_exact(payload.data(), n);
  return payload;
}

std::vector<double> EncodeDist(const Dist& dist, bool as_logprobs) {
  std::vector<double> out(dist.probs().begin(), dist.probs().end());
  if (as_logprobs) {
    // JSON has no -inf; DBL_MIN stands in for an exact zero.
    for (double& v : out) v = std::log(std::max(v, DBL_MIN));
  }
  return out;
}

Dist DecodeDist(const std::vector<double>& values, bool as_logprobs) {
  if (!as_logprobs) return Dist::FromProbabilities(values);
  std::vector<double> probs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    probs[i] = std::exp(values[i]);
  }
  return Dist::FromProbabilities(std::move(probs));
}

std::string HandleRequest(const DistributionProvider& provider,
                          std::string_view request_text,
                          const std::string& required_auth,
                          const std::string& model_name) {
  try {
    const json request = json::parse(request_text);
    if (!request.contains("version")) {
      return ErrorResponse(ErrorCode::kMalformedResponse,
                           "request lacks protocol version")
          .dump();
    }
    if (request["version"].get<int>() != kProtocolVersion) {
      return ErrorResponse(ErrorCode::kUnsupported,
                           "unsupported protocol version")
          .dump();
    }
    if (!required_auth.empty() &&
        request.value("auth", std::string()) != required_auth) {
      return ErrorResponse(ErrorCode::kInvalidInput, "authentication failed")
          .dump();
    }
    return Dispatch(provider, request, model_name).dump();
  } catch (const Error& e) {
    return ErrorResponse(e.code(), e.what()).dump();
  } catch (const json::exception& e) {
    return ErrorResponse(ErrorCode::kMalformedResponse, e.what()).dump();
  } catch (const std::exception& e) {
    return ErrorResponse(ErrorCode::kInvalidInput, e.what()).dump();
  }
}

}  // namespace dpfusion::wire
