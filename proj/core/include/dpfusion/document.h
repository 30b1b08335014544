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

#ifndef DPFUSION_DOCUMENT_H_
#define DPFUSION_DOCUMENT_H_

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dpfusion {

inline constexpr std::string_view kDefaultPlaceholder = "___";
inline constexpr std::size_t kDefaultMaxDocumentChars = 10000;
inline constexpr std::size_t kDefaultMaxGroups = 8;

struct PrivacyGroup {
  int id = 0;
  std::string label;
  double beta = 0.0;
};

// Byte range [start, end) of the UTF-8 text owned by one privacy group.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  int group = 0;
};

struct DocumentLimits {
  std::size_t max_chars = kDefaultMaxDocumentChars;
  std::size_t max_groups = kDefaultMaxGroups;
};

// Text plus disjoint spans assigning content to privacy groups; everything
// outside a span is public.
class AnnotatedDocument {
 public:
  // Validates and sorts spans by offset. Throws kMalformedDocument when
  // spans overlap, leave the text, split a UTF-8 sequence, or name an
  // unknown group; when group ids are not exactly 1..m; when a budget is not
  // positive; or when the document exceeds `limits`.
  AnnotatedDocument(std::string doc_id, std::string text,
                    std::vector<Span> spans, std::vector<PrivacyGroup> groups,
                    DocumentLimits limits = {});

  const std::string& doc_id() const { return doc_id_; }
  const std::string& text() const { return text_; }
  const std::vector<Span>& spans() const { return spans_; }
  const std::vector<PrivacyGroup>& groups() const { return groups_; }
  std::size_t group_count() const { return groups_.size(); }
  const PrivacyGroup& group(int id) const;

  // Spans of one group, in document order.
  std::vector<Span> SpansOf(int group_id) const;

 private:
  std::string doc_id_;
  std::string text_;
  std::vector<Span> spans_;
  std::vector<PrivacyGroup> groups_;
};

struct ContextView {
  std::string rendered_text;
  std::set<int> revealed_groups;
};

// Renders `doc` revealing exactly `revealed`; every other span collapses to
// one copy of `placeholder` regardless of its length.
ContextView RenderView(const AnnotatedDocument& doc,
                       const std::set<int>& revealed,
                       std::string_view placeholder = kDefaultPlaceholder);

struct Partition {
  ContextView public_view;
  // Index i holds the view revealing group i + 1.
  std::vector<ContextView> group_views;
};

Partition PartitionDocument(const AnnotatedDocument& doc,
                            std::string_view placeholder = kDefaultPlaceholder);

// Everything revealed except `hidden_group`; what the token-recovery
// adversary sees.
ContextView AllButOneView(const AnnotatedDocument& doc, int hidden_group,
                          std::string_view placeholder = kDefaultPlaceholder);

// Substitutes `replacements[k]` for the k-th span of `group_id` and reveals
// every other group.
std::string RenderWithReplacement(const AnnotatedDocument& doc, int group_id,
                                  const std::vector<std::string>& replacements);

// Chat-formatted paraphrasing prompt. `user_text` carries the
// {private_doc} and {placeholder} slots.
struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::string assistant_prefix;
  std::string placeholder = std::string(kDefaultPlaceholder);
  // Appended to the user turn when non-empty (the no-DPI baselines use it).
  std::string extra_instruction;

  static PromptBundle Default();
  // Default() plus the privacy instruction used by the no-DPI baselines.
  static PromptBundle WithPrivacyInstruction();
};

inline constexpr std::string_view kPrivacyInstruction =
    "Produce a natural paraphrase of this for ensuring privacy.";

std::string AssemblePrompt(const ContextView& view,
                           const PromptBundle& bundle);

// JSON document format:
//   {"doc_id": str, "text": str,
//    "spans": [{"start": int, "end": int, "group": int}],
//    "groups": [{"id": int, "label": str, "beta": float}]}
AnnotatedDocument ParseDocumentJson(std::string_view json,
                                    DocumentLimits limits = {});
std::string DocumentToJson(const AnnotatedDocument& doc);
// Reads a file holding one JSON object or JSONL of several.
std::vector<AnnotatedDocument> LoadDocuments(const std::string& path,
                                             DocumentLimits limits = {});

// Template file: {"system": str, "user": str, "assistant": str,
// "placeholder": str, "extra_instruction": str}; missing keys keep defaults.
PromptBundle LoadPromptBundle(const std::string& path);

std::size_t Utf8Length(std::string_view text);

}  // namespace dpfusion

#endif  // DPFUSION_DOCUMENT_H_
