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

#ifndef DPFUSION_WIRE_PROTOCOL_H_
#define DPFUSION_WIRE_PROTOCOL_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dpfusion/backend.h"

// Length-prefixed JSON over a stream socket. Each frame is a 4-byte
// big-endian payload length followed by that many bytes of UTF-8 JSON.
//
// Requests carry "version" (mandatory), "op", and op-specific fields:
//   next_dist        {"contexts": [str], "temperature": float, "logprobs": bool}
//   batch_next_dist  same as next_dist with any number of contexts
//   score            {"contexts": [str], "continuation": str}
//   next_logits      {"contexts": [str]}
//   info             {}
//   detokenize       {"tokens": [int]}
// plus an optional "auth" token. Responses carry "version" and one of
//   {"vocab_size": int, "dists": [[float]], "logprobs": bool}
//   {"logprobs": [float]}
//   {"vocab_size": int, "logits": [[float]]}
//   {"vocab_size": int, "eos_token": int, "model": str,
//    "capabilities": {"next_dist", "teacher_force_score", "batched", "logits"}}
//   {"pieces": [str]}
//   {"error": {"code": str, "message": str}}
// With "logprobs": true a dist is transmitted as natural-log probabilities.
namespace dpfusion::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

// Blocking frame I/O on a connected socket. Throw kTransport on short reads,
// closed peers, and oversize frames.
void WriteFrame(int fd, std::string_view payload);
std::string ReadFrame(int fd);

// Probabilities as sent on the wire, optionally in log space.
std::vector<double> EncodeDist(const Dist& dist, bool as_logprobs);
Dist DecodeDist(const std::vector<double>& values, bool as_logprobs);

// Server-side dispatch of one request against `provider`. Never throws;
// failures become error responses. An empty `required_auth` disables the
// token check.
std::string HandleRequest(const DistributionProvider& provider,
                          std::string_view request,
                          const std::string& required_auth,
                          const std::string& model_name);

}  // namespace dpfusion::wire

#endif  // DPFUSION_WIRE_PROTOCOL_H_
