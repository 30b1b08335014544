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

#include "dpfusion/error.h"

namespace dpfusion {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return "invalid input";
    case ErrorCode::kDivergenceUndefined:
      return "divergence undefined";
    case ErrorCode::kMalformedDocument:
      return "malformed document";
    case ErrorCode::kDegenerateDocument:
      return "degenerate document";
    case ErrorCode::kContextTooLong:
      return "context too long";
    case ErrorCode::kTransport:
      return "transport failure";
    case ErrorCode::kMalformedResponse:
      return "malformed response";
    case ErrorCode::kUnsupported:
      return "unsupported operation";
    case ErrorCode::kScoring:
      return "scoring failure";
  }
  return "unknown";
}

}  // namespace dpfusion
