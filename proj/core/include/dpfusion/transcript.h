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

#ifndef DPFUSION_TRANSCRIPT_H_
#define DPFUSION_TRANSCRIPT_H_

#include <string>
#include <string_view>

#include "dpfusion/fusion.h"

namespace dpfusion {

// JSONL, one line per step:
//   {"t": int, "token": int, "text_piece": str,
//    "groups": [{"id": int, "lambda": float, "div": float}], "fused_div": float}
// then a final line
//   {"final": true, "output_text": str, "output_tokens": [int],
//    "config": {...RunEcho...}}
// Invalid transcripts are refused; they must never be written out.
std::string TranscriptToJsonl(const FusionTranscript& transcript);
FusionTranscript TranscriptFromJsonl(std::string_view jsonl);

FusionTranscript LoadTranscript(const std::string& path);

}  // namespace dpfusion

#endif  // DPFUSION_TRANSCRIPT_H_
